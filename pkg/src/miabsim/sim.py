"""Slot-loop engine tying mobility, channel, topology, MAC and PHY together."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .channel import BusBody, ChannelModel
from .config import ScenarioConfig, ScenarioKind
from .geometry import DU_OFFSET, MT_OFFSET, rotate_offset, step_mobility
from .metrics import CELL_KIND_CODES, MetricStore, export
from .phy import (
    McsTable, OuterLoop, Outcome, backhaul_matrix, backhaul_streams, bler, noise_dbm,
)
from .scenario import NodeKind, build_scenario
from .antenna import element_positions, steering
from .scheduler import ACCESS, BACKHAUL, schedule_rbs
from .tdd import (
    FRAME_SLOTS, IAB_BACKHAUL, IAB_DONOR, IAB_NODE, MACRO_PICO, ConstraintViolation, ResourceAttr,
    Role, du_resource_attrs,
)
from .topology import Network, evaluate_attachment
from .traffic import Direction, TrafficSource

_LINK_CLASS = {0: ("donor_pedestrian", "donor_passenger"), 1: ("pico_pedestrian", "pico_passenger"),
               2: ("du_pedestrian", "du_passenger")}
RNG_STREAMS = ("scenario", "mobility", "channel", "fading", "phy", "traffic")


class AuditFailure(RuntimeError):
    pass


@dataclass
class Audits:
    hd: int = 0
    role: int = 0
    rr: int = 0
    attachment: int = 0
    mt_parent: int = 0
    conservation: int = 0
    degenerate_backhaul: int = 0

    def failures(self) -> dict[str, int]:
        return {k: v for k, v in self.__dict__.items() if v and k != "degenerate_backhaul"}


@dataclass
class SlotGrant:
    cell: int
    tx: int
    rx: int
    bearer: object
    grant: object
    streams: object = None
    mcs: int = 0
    est_db: float = 0.0


@dataclass
class RunResult:
    config: ScenarioConfig
    metrics: MetricStore
    network: Network
    audits: Audits
    generated_bits: list
    delivered_bits: list
    manifest: dict = field(default_factory=dict)
    grant_log: list | None = None
    link_trace: list | None = None
    trajectory: list | None = None


def spawn_rngs(seed: int) -> dict[str, np.random.Generator]:
    ss = np.random.SeedSequence(seed)
    return {name: np.random.default_rng(s) for name, s in zip(RNG_STREAMS, ss.spawn(len(RNG_STREAMS)))}


class Simulation:
    def __init__(self, cfg: ScenarioConfig, strict: bool = True, dump_grants: bool = False,
                 dump_links: bool = False, dump_trajectory: bool = False):
        cfg.validate()
        self.cfg = cfg
        self.strict = strict
        self.rngs = spawn_rngs(cfg.seed)
        self.scn = build_scenario(cfg, self.rngs["scenario"])
        self.nodes = self.scn.nodes
        self.n = len(self.nodes)
        self.kind = [nd.kind for nd in self.nodes]
        self.table = McsTable.from_csv(cfg.mcs_table)
        self.outer = OuterLoop(self.table)
        self.channel = ChannelModel(self.nodes, cfg.carrier_hz, cfg.slot_s, cfg.num_rbs,
                                    self.rngs["channel"], self.rngs["fading"])
        self.net = Network(self.nodes, self.scn.mobile.bus_nodes, cfg.preemptive_bsr, cfg.migration_discard_dl)
        self.ue_ids = self.net.ues
        self.ue_kind = {u: ("passenger" if self.kind[u] is NodeKind.PASSENGER else "pedestrian") for u in self.ue_ids}
        self.traffic = TrafficSource(self.ue_ids, cfg.cbr_packet_bits, cfg.cbr_interarrival_slots,
                                     self.rngs["traffic"])
        self.metrics = MetricStore(self.ue_kind, cfg.warmup_slots, cfg.duration_slots - cfg.warmup_slots, cfg.slot_s,
                                   num_mcs=self.table.top)
        self.audits = Audits()
        self.miab = cfg.scenario_kind is ScenarioKind.MIAB
        self.access_pattern = {}
        for c in self.net.cells:
            k = self.kind[c]
            if k is NodeKind.MIAB_DU:
                self.access_pattern[c] = IAB_NODE
            elif self.miab:
                self.access_pattern[c] = IAB_DONOR
            else:
                self.access_pattern[c] = MACRO_PICO
        self.du_attrs = du_resource_attrs(IAB_NODE)
        tx_dbm = np.array([nd.tx_power_dbm for nd in self.nodes])
        self.p_rb = 10.0 ** ((tx_dbm - 10.0 * math.log10(cfg.num_rbs)) / 10.0)
        self.noise_dbm = noise_dbm(cfg.rb_bandwidth_hz)
        self.noise_mw = 10.0 ** (self.noise_dbm / 10.0)
        self.est: dict = {}
        self.bh_state: dict[int, tuple] = {}
        self.cell_code = {}
        for c in self.net.cells:
            k = self.kind[c]
            self.cell_code[c] = CELL_KIND_CODES["donor" if k is NodeKind.IAB_DONOR else
                                                "pico" if k is NodeKind.PICO_GNB else "du"]
        self.du_of_bus = {b: du for b, (du, mt) in self.scn.mobile.bus_nodes.items()}
        self.bus_of = {nd.id: nd.bus_id for nd in self.nodes}
        self.grant_log = [] if dump_grants else None
        self.rr_log: list = []
        self.rr_checked = 0
        self.link_trace = [] if dump_links else None
        self.trajectory = [] if dump_trajectory else None
        self.mt_tx_now: set[int] = set()
        self._profile_cache = None
        self._next_cache = {}
        self._split: dict = {}
        self.positions = None
        self.velocities = None

    # geometry ----------------------------------------------------------------
    def _kinematics(self):
        n = self.n
        pos = np.zeros((n, 3))
        vel = np.zeros((n, 3))
        az = np.zeros(n)
        for nid, xyz in self.scn.fixed_positions.items():
            pos[nid] = xyz
            az[nid] = self.nodes[nid].azimuth_deg or 0.0
        bodies = []
        mob = self.scn.mobile
        for b, w in enumerate(mob.buses):
            c = w.position()
            h = w.heading_vector()
            bodies.append(BusBody((float(c[0]), float(c[1])), (float(h[0]), float(h[1]))))
            heading_deg = math.degrees(math.atan2(h[1], h[0]))
            v = np.array([h[0], h[1], 0.0]) * w.speed_mps
            if b in mob.bus_nodes:
                du, mt = mob.bus_nodes[b]
                pos[du] = c + rotate_offset(DU_OFFSET, h)
                pos[mt] = c + rotate_offset(MT_OFFSET, h)
                az[du] = az[mt] = heading_deg
                vel[du] = vel[mt] = v
        for pid, (b, off) in mob.passenger_seats.items():
            w = mob.buses[b]
            pos[pid] = w.position() + rotate_offset(off, w.heading_vector())
            vel[pid] = np.array([*w.heading_vector(), 0.0]) * w.speed_mps
        for pid, w in zip(mob.pedestrian_ids, mob.pedestrians):
            pos[pid] = w.position()
            vel[pid] = np.array([*w.heading_vector(), 0.0]) * w.speed_mps
        return pos, vel, az, bodies

    def _refresh(self, slot: int) -> None:
        k = self.cfg.channel_refresh_slots
        if slot > 0:
            step_mobility(self.scn.layout, self.scn.mobile, self.cfg.slot_s * k, self.rngs["mobility"])
        pos, vel, az, bodies = self._kinematics()
        self.positions, self.velocities, self.azimuths = pos, vel, az
        self.channel.refresh(pos, az, vel, bodies)
        g3 = self.channel.g3
        idx = np.arange(self.n)
        # gain of a matched beam on both ends, without fast fading
        self.beam_gain = g3[:, idx, idx]                # [tx, rx]: tx steered at rx, toward rx
        self.ls_gain = self.beam_gain * self.beam_gain.T * self.channel.gain_lin
        if self.trajectory is not None:
            for nid in range(self.n):
                if not self.nodes[nid].is_cell or self.kind[nid] is NodeKind.MIAB_DU:
                    if nid not in self.scn.fixed_positions:
                        self.trajectory.append((slot, nid, *(round(float(x), 4) for x in pos[nid])))

    # topology ----------------------------------------------------------------
    def _ue_candidates(self, ue: int, rsrp_col: np.ndarray) -> list[int]:
        cells = self.net.cells
        cfg = self.cfg
        out = []
        for i, c in enumerate(cells):
            if self.kind[c] is NodeKind.MIAB_DU and self.kind[ue] is NodeKind.PEDESTRIAN \
                    and cfg.admission_policy.value == "rsrp_dwell":
                if rsrp_col[i] < cfg.admission_min_rsrp_dbm or self._dwell_s(ue, c) < cfg.admission_min_dwell_s:
                    continue
            out.append(c)
        return out

    def _dwell_s(self, ue: int, du: int) -> float:
        r = (self.positions[ue] - self.positions[du])[:2]
        v = (self.velocities[ue] - self.velocities[du])[:2]
        R = self.cfg.admission_radius_m
        if r @ r > R * R:
            return 0.0
        vv = v @ v
        if vv < 1e-12:
            return math.inf
        rv = r @ v
        return (-rv + math.sqrt(rv * rv - vv * (r @ r - R * R))) / vv

    def _evaluate_topology(self, slot: int) -> None:
        net = self.net
        cells = net.cells
        row = {c: i for i, c in enumerate(cells)}
        rsrp = self.channel.rsrp_matrix(cells)
        hyst = self.cfg.handover_hysteresis_db
        for mt in net.mts:
            cands = net.iab_donors
            vals = [rsrp[row[c], mt] for c in cands]
            cur = net.attach.serving.get(mt)
            new = evaluate_attachment(cur, cands, vals, hyst)
            self._audit_attachment(new, cands, vals, rsrp[row[new], mt], hyst)
            if new != cur:
                net.events.append(_event(slot, mt, cur, new, rsrp, row))
                if cur is None:
                    net.integrate_miab_node(mt, {c: rsrp[row[c], mt] for c in cands}, slot)
                    net.events.pop()
                else:
                    net.migrate_node(mt, new, slot)
            net.attach.last_eval[mt] = slot
            if self.kind[net.attach.serving[mt]] is not NodeKind.IAB_DONOR:
                self.audits.mt_parent += 1
        for ue in net.ues:
            col = rsrp[:, ue]
            cands = self._ue_candidates(ue, col)
            vals = [col[row[c]] for c in cands]
            cur = net.attach.serving.get(ue)
            new = evaluate_attachment(cur, cands, vals, hyst)
            self._audit_attachment(new, cands, vals, col[row[new]], hyst)
            if new != cur:
                net.events.append(_event(slot, ue, cur, new, rsrp, row))
                net.handover_ue(ue, new, slot)
            net.attach.last_eval[ue] = slot
        self._profile_cache = None

    def _audit_attachment(self, serving, cands, vals, serving_rsrp, hyst) -> None:
        if serving not in cands or serving_rsrp < max(vals) - hyst - 1e-9:
            self.audits.attachment += 1
            if self.strict:
                raise AuditFailure(f"attachment optimality violated for cell {serving}")

    def _record_profile(self) -> None:
        if self._profile_cache is None:
            self._profile_cache = []
            for d in self.net.donors:
                p = self.net.donor_link_profile(d)
                self._profile_cache += [(d, "direct_ues", p.direct_ues), (d, "attached_mts", p.attached_mts),
                                        (d, "backhaul_served", p.backhaul_served), (d, "total", p.total)]
        prof = self.metrics.profile
        for key in self._profile_cache:
            prof[key] += 1

    # link estimates ----------------------------------------------------------
    def _access_estimate(self, key, tx: int, rx: int) -> float:
        est = self.est.get(key)
        if est is None:
            g = self.ls_gain[tx, rx]
            est = 10.0 * math.log10(max(self.p_rb[tx] * g / self.noise_mw, 1e-30))
        return est

    def _backhaul_sv(self, donor: int, mt: int, slot: int) -> np.ndarray:
        """Top singular values of the donor-MT channel with large-scale gain applied."""
        los = bool(self.channel.los[donor, mt])
        st = self.bh_state.get(mt)
        if st is None or st[1] != los or st[2] != donor or slot - st[0] >= self.cfg.backhaul_coherence_slots:
            pos = self.positions
            u = pos[mt] - pos[donor]
            u = u / np.linalg.norm(u)
            a_t = steering(element_positions(self.nodes[donor].array, self.azimuths[donor]), u)
            a_r = steering(element_positions(self.nodes[mt].array, self.azimuths[mt]), -u)
            H = backhaul_matrix(a_r, a_t, los, self.rngs["phy"])
            s = np.linalg.svd(H, compute_uv=False)[:8]
            st = (slot, los, donor, s)
            self.bh_state[mt] = st
        g3 = self.channel.g3
        el = (g3[donor, mt, mt] / self.nodes[donor].num_elements) * (g3[mt, donor, donor] / self.nodes[mt].num_elements)
        return st[3] * math.sqrt(el * self.channel.gain_lin[donor, mt])

    def _next_role_slot(self, pattern, role, ready: int) -> int:
        key = (pattern.name, role, ready % FRAME_SLOTS)
        off = self._next_cache.get(key)
        if off is None:
            off = pattern.next_slot(role, ready) - ready
            self._next_cache[key] = off
        return ready + off

    # one slot ----------------------------------------------------------------
    def _schedule(self, slot: int) -> list[SlotGrant]:
        out = []
        num_rbs = self.cfg.num_rbs
        for c in self.net.cells:
            bearers = self.net.by_cell[c]
            if not bearers:
                continue
            acc_role = self.access_pattern[c].role(slot)
            bh_role = IAB_BACKHAUL.role(slot) if (self.miab and self.kind[c] is NodeKind.IAB_DONOR) else Role.SILENT
            if acc_role is Role.SILENT and bh_role is Role.SILENT:
                continue
            elig = []
            bpr = {}
            info = {}
            for b in self._role_bearers(c, bearers, acc_role, bh_role):
                if not b.packets or b.packets[0].ready > slot:
                    continue
                tx, rx = (c, b.node) if b.direction is Direction.DL else (b.node, c)
                key = (c, b.node, int(b.direction))
                if b.kind is BACKHAUL:
                    sv = self._backhaul_sv(c, b.node, slot)
                    ni = self.est.get(key, self.noise_mw)
                    ss = backhaul_streams(sv, self.p_rb[tx], ni, self.table, self.outer.offset(key))
                    bpr[b.id] = ss.bits_per_rb(self.table)
                    info[b.id] = (tx, rx, ss, 0, 0.0)
                else:
                    est = self._access_estimate(key, tx, rx)
                    mcs = self.outer.select(key, est)
                    bpr[b.id] = self.table.bpr_scalar(mcs)
                    info[b.id] = (tx, rx, None, mcs, est)
                elig.append(b)
            if not elig:
                continue
            for g in schedule_rbs(slot, elig, num_rbs, bpr, self.rr_log):
                tx, rx, ss, mcs, est = info[g.bearer.id]
                out.append(SlotGrant(c, tx, rx, g.bearer, g, ss, mcs, est))
        self._audit_rr()
        return out

    def _audit_rr(self) -> None:
        """Every block must go to a bearer waiting at least as long as any other still competing."""
        for r in self.rr_log:
            if r.competing_wait is not None and r.wait < r.competing_wait:
                self._violation("rr", f"RB block at cell {r.cell} slot {r.slot} skipped a longer waiter")
        self.rr_checked += len(self.rr_log)
        self.rr_log.clear()

    def _role_bearers(self, c: int, bearers: list, acc_role: Role, bh_role: Role) -> list:
        """Bearers of cell ``c`` whose direction matches the active roles."""
        split = self._split.get(c)
        if split is None or split[0] != len(bearers):
            split = (len(bearers), {})
            for b in bearers:
                want = Role.DL if b.direction is Direction.DL else Role.UL
                split[1].setdefault((b.kind, want), []).append(b)
            self._split[c] = split
        a = split[1].get((ACCESS, acc_role), ())
        h = split[1].get((BACKHAUL, bh_role), ())
        return [*a, *h] if h else a

    def _audit_slot(self, slot: int, grants: list[SlotGrant]) -> None:
        du_tx, du_rx, mt_tx, mt_rx = set(), set(), set(), set()
        for sg in grants:
            b = sg.bearer
            c = sg.cell
            if self.kind[c] is NodeKind.MIAB_DU:
                if self.du_attrs[slot % FRAME_SLOTS] is ResourceAttr.UNAVAILABLE:
                    self._violation("role", f"DU {c} scheduled in an unavailable slot {slot}")
                (du_tx if b.direction is Direction.DL else du_rx).add(self.bus_of[c])
            if b.kind is BACKHAUL:
                if IAB_BACKHAUL.role(slot) is not (Role.DL if b.direction is Direction.DL else Role.UL):
                    self._violation("role", f"backhaul grant outside backhaul slot {slot}")
                (mt_rx if b.direction is Direction.DL else mt_tx).add(self.bus_of[b.node])
            else:
                want = Role.DL if b.direction is Direction.DL else Role.UL
                if self.access_pattern[c].role(slot) is not want:
                    self._violation("role", f"access grant against the slot role at cell {c}, slot {slot}")
        if (mt_rx & du_tx) or (mt_tx & du_rx):
            self._violation("hd", f"half-duplex broken in slot {slot}")
        self.mt_tx_now = {self.net.mt_of_du[self.du_of_bus[b]] for b in mt_tx} if mt_tx else set()

    def _violation(self, kind: str, msg: str) -> None:
        setattr(self.audits, kind, getattr(self.audits, kind) + 1)
        if self.strict:
            raise ConstraintViolation(msg)

    def _interference(self, TX: np.ndarray, RX: np.ndarray, slot: int) -> np.ndarray:
        L, R = TX.shape
        if L < 2:
            return np.zeros((L, R))
        uniq, inv = np.unique(np.vstack([TX, RX]), axis=1, return_inverse=True)
        inv = np.asarray(inv).ravel()
        TU, RU = uniq[:L], uniq[L:]
        A = TU >= 0
        M = A[:, None, :] & A[None, :, :]
        M[np.arange(L), np.arange(L), :] = False
        li, ji, ui = np.nonzero(M)
        IU = np.zeros((L, uniq.shape[1]))
        if li.size:
            tl, rl, tj, rj = TU[li, ui], RU[li, ui], TU[ji, ui], RU[ji, ui]
            g3 = self.channel.g3
            contrib = (self.p_rb[tj] * g3[tj, rj, rl] * g3[rl, tl, tj] * self.channel.gain_lin[tj, rl]
                       * self.channel.fading_power(tj, rl, slot))
            np.add.at(IU, (li, ui), contrib)
        return IU[:, inv]

    def _execute(self, slot: int, grants: list[SlotGrant]) -> None:
        if not grants:
            return
        cfg = self.cfg
        lanes = {}
        for sg in grants:
            lanes.setdefault(sg.cell, len(lanes))
        L = len(lanes)
        TX = np.full((L, cfg.num_rbs), -1, dtype=np.int64)
        RX = np.full((L, cfg.num_rbs), -1, dtype=np.int64)
        for sg in grants:
            l = lanes[sg.cell]
            for a, n in sg.grant.blocks:
                TX[l, a:a + n] = sg.tx
                RX[l, a:a + n] = sg.rx
        I = self._interference(TX, RX, slot)
        rng = self.rngs["phy"]
        net = self.net
        table = self.table
        access = [sg for sg in grants if sg.streams is None]
        if access:
            n_acc = len(access)
            txs = np.array([sg.tx for sg in access])
            rxs = np.array([sg.rx for sg in access])
            sig = self.p_rb[txs] * self.ls_gain[txs, rxs] * self.channel.fading_power(txs, rxs, slot)
            sig = np.maximum(sig, 1e-300)
            rb_lists = [sg.grant.rb_indices() for sg in access]
            counts = np.array([len(r) for r in rb_lists])
            flat_rb = np.concatenate(rb_lists)
            flat_l = np.repeat([lanes[sg.cell] for sg in access], counts)
            starts = np.concatenate(([0], np.cumsum(counts)[:-1]))
            logs = 10.0 * np.log10(np.repeat(sig, counts) / (self.noise_mw + I[flat_l, flat_rb]))
            sinr_v = (np.add.reduceat(logs, starts) / counts).tolist()
            snr_v = (10.0 * np.log10(sig / self.noise_mw)).tolist()
            thr = np.array([table.thr_scalar(sg.mcs) for sg in access])
            err_v = (rng.random(n_acc) < bler(np.array(sinr_v) - thr)).tolist()
            du_code = CELL_KIND_CODES["du"]
            for i, sg in enumerate(access):
                b = sg.bearer
                d = int(b.direction)
                key = (sg.cell, b.node, d)
                sinr, err = sinr_v[i], err_v[i]
                self.outer.update(key, Outcome.ERROR if err else Outcome.SUCCESS, sg.est_db)
                self.est[key] = sinr
                ue = b.node
                cls = 1 if self.kind[ue] is NodeKind.PASSENGER else 0
                cell_code = self.cell_code[sg.cell]
                mt_flag = -1
                if cell_code == du_code:
                    mt_flag = 1 if net.mt_of_du[sg.cell] in self.mt_tx_now else 0
                self.metrics.record_sinr(cls, d, cell_code, mt_flag, sinr, snr_v[i])
                self.metrics.record_mcs(_LINK_CLASS[cell_code][cls], d, sg.mcs, err)
                if self.grant_log is not None:
                    self.grant_log.append((slot, sg.cell, b.id, int(counts[i]), sg.mcs, 1,
                                           "ERROR" if err else "SUCCESS"))
                if not err:
                    self._deliver(b, sg.grant.bits_per_rb * int(counts[i]), slot)
        for sg in grants:
            if sg.streams is not None:
                self._execute_backhaul(sg, lanes[sg.cell], I, slot, rng)

    def _execute_backhaul(self, sg: SlotGrant, lane: int, I: np.ndarray, slot: int, rng) -> None:
        b = sg.bearer
        d = int(b.direction)
        key = (sg.cell, b.node, d)
        rbs = sg.grant.rb_indices()
        ni = self.noise_mw + I[lane, rbs]
        ss = sg.streams
        sv = ss.singular_values
        k = len(sv)
        p = self.p_rb[sg.tx]
        per_rb = (sv[:, None] ** 2) * p / k / ni[None, :]
        sinr_s = np.mean(10.0 * np.log10(np.maximum(per_rb, 1e-300)), axis=1)
        errs = rng.random(k) < bler(sinr_s - self.table.threshold(ss.mcs))
        bits = 0
        for i in range(k):
            err = bool(errs[i])
            self.outer.update(key, Outcome.ERROR if err else Outcome.SUCCESS, float(ss.sinr_db[i]))
            if not err:
                bits += self.table.bpr_scalar(int(ss.mcs[i])) * len(rbs)
            self.metrics.record_mcs("backhaul", d, int(ss.mcs[i]), err)
        if ss.degenerate:
            self.audits.degenerate_backhaul += 1
        self.est[key] = float(10.0 ** (np.mean(10.0 * np.log10(ni)) / 10.0))
        snr = 10.0 * math.log10(float(np.sum(sv ** 2)) * p / self.noise_mw)
        self.metrics.record_sinr(2, d, CELL_KIND_CODES["donor"], -1, float(np.max(sinr_s)), snr)
        if self.grant_log is not None:
            self.grant_log.append((slot, sg.cell, b.id, len(rbs), ";".join(str(int(m)) for m in ss.mcs), k,
                                   f"{k - int(errs.sum())}/{k}"))
        if bits:
            self._deliver(b, bits, slot)

    def _deliver(self, b, bits: int, slot: int) -> None:
        done = b.deliver(bits, slot)
        if not done:
            return
        if b.kind is BACKHAUL:
            pattern, role = IAB_BACKHAUL, (Role.DL if b.direction is Direction.DL else Role.UL)
        else:
            pattern = self.access_pattern[b.cell]
            role = Role.DL if b.direction is Direction.DL else Role.UL
        for p in done:
            if p.queue_free and slot != self._next_role_slot(pattern, role, p.ready):
                p.queue_free = False
            if self.net.forward(p, b, slot):
                self.metrics.record_delivery(p, slot)
                self.delivered_bits[p.direction] += p.size

    # run ---------------------------------------------------------------------
    def run(self) -> RunResult:
        cfg = self.cfg
        self.delivered_bits = [0, 0]
        usage_rows = {"macro_pico": MACRO_PICO} if not self.miab else {
            "iab_donor": IAB_DONOR, "iab_backhaul": IAB_BACKHAUL, "iab_node": IAB_NODE}
        for slot in range(cfg.duration_slots):
            if slot % cfg.channel_refresh_slots == 0:
                self._refresh(slot)
                if self.link_trace is not None:
                    self._trace_links(slot)
            if slot % cfg.handover_eval_period_slots == 0:
                self._evaluate_topology(slot)
            for p in self.traffic.generate(slot):
                self.net.inject(p, slot)
            grants = self._schedule(slot)
            self._audit_slot(slot, grants)
            self._execute(slot, grants)
            for name, pat in usage_rows.items():
                self.metrics.tdd_usage[name][int(pat.role(slot))] += 1
            self._record_profile()
        return self._finish()

    def _trace_links(self, slot: int) -> None:
        ch = self.channel
        cells = self.net.cells
        rsrp = ch.rsrp_matrix(cells)
        row = {c: i for i, c in enumerate(cells)}
        for node, cell in sorted(self.net.attach.serving.items()):
            self.link_trace.append((slot, cell, node, int(ch.ctype[cell, node]), int(ch.los[cell, node]),
                                    round(float(ch.pathloss[cell, node]), 4), round(float(ch.shadowing[cell, node]), 4),
                                    round(float(ch.penetration[cell, node]), 4), round(float(rsrp[row[cell], node]), 4)))

    def _finish(self) -> RunResult:
        cfg = self.cfg
        gen = list(self.traffic.generated_bits)
        queued = [self.net.queued_bits(Direction.DL), self.net.queued_bits(Direction.UL)]
        for d in (0, 1):
            if gen[d] != self.delivered_bits[d] + queued[d] + self.net.dropped_bits[d]:
                self.audits.conservation += 1
        for p in self.net.queued_packets():
            if p.created >= cfg.warmup_slots:
                self.metrics.censored[p.direction] += 1
        if self.strict and self.audits.failures():
            raise AuditFailure(f"audits fired: {self.audits.failures()}")
        manifest = self.manifest(gen, queued)
        return RunResult(cfg, self.metrics, self.net, self.audits, gen, list(self.delivered_bits), manifest,
                         self.grant_log, self.link_trace, self.trajectory)

    def manifest(self, gen, queued) -> dict:
        m = self.metrics
        return {
            "build_id": f"miabsim-{__version__}+{self.table.name}",
            "config": self.cfg.to_dict(),
            "nodes": len(self.nodes),
            "bits": {"generated": gen, "delivered": list(self.delivered_bits), "queued": queued,
                     "dropped": list(self.net.dropped_bits)},
            "censored_packets": {"dl": m.censored[0], "ul": m.censored[1]},
            "audits": dict(self.audits.__dict__),
            "pathloss_clamps": self.channel.clamp_count,
            "migrations": self.net.migrations,
            "handovers": self.net.handovers,
            "stale_routes": self.net.stale_routes,
            "transmissions": m.transmissions,
            "rr_assignments_checked": self.rr_checked,
            "tdd_usage": {k: {"dl": v[1], "ul": v[2], "silent": v[0]} for k, v in sorted(m.tdd_usage.items())},
        }


def _event(slot, node, cur, new, rsrp, row):
    from .topology import AttachmentEvent
    old_r = None if cur is None else float(rsrp[row[cur], node])
    return AttachmentEvent(slot, node, cur, new, old_r, float(rsrp[row[new], node]))


def run_simulation(cfg: ScenarioConfig, out_dir: str | Path | None = None, strict: bool = True,
                   dump_grants: bool = False, dump_links: bool = False, dump_trajectory: bool = False) -> RunResult:
    sim = Simulation(cfg, strict=strict, dump_grants=dump_grants, dump_links=dump_links,
                     dump_trajectory=dump_trajectory)
    res = sim.run()
    if out_dir is not None:
        write_outputs(res, sim, out_dir)
    return res


def write_outputs(res: RunResult, sim: Simulation, out_dir) -> None:
    from .metrics import _write_csv
    out = Path(out_dir)
    export(res.metrics, out, res.manifest, sim.ue_kind)
    ev = [(e.slot, e.node, "" if e.old_cell is None else e.old_cell, e.new_cell,
           "" if e.old_rsrp_dbm is None else repr(round(e.old_rsrp_dbm, 6)), repr(round(e.new_rsrp_dbm, 6)))
          for e in res.network.events]
    _write_csv(out / "attachments.csv", ("slot", "node", "old_cell", "new_cell", "old_rsrp_dbm", "new_rsrp_dbm"), ev)
    if res.grant_log is not None:
        _write_csv(out / "grants.csv", ("slot", "cell", "bearer", "rbs", "mcs", "streams", "outcome"), res.grant_log)
    if res.link_trace is not None:
        _write_csv(out / "links.csv", ("slot", "tx", "rx", "type", "los", "pl_db", "sf_db", "pen_db", "rsrp_dbm"),
                   res.link_trace)
    if res.trajectory is not None:
        _write_csv(out / "trajectory.csv", ("slot", "node", "x", "y", "z"), res.trajectory)
