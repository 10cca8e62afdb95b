"""Serving relationships, RSRP-driven attachment and two-hop forwarding."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .scenario import NodeDescriptor, NodeKind
from .scheduler import ACCESS, BACKHAUL, BearerQueue
from .tdd import IAB_BACKHAUL, Role
from .traffic import Direction, Packet


class NoCandidate(RuntimeError):
    pass


class StaleRoute(RuntimeError):
    pass


def evaluate_attachment(serving: int | None, candidates, rsrp, hysteresis_db: float = 0.0) -> int:
    """Keep ``serving`` unless a candidate beats it by more than the hysteresis.

    ``candidates`` and ``rsrp`` are aligned; ties resolve to the lowest cell id.
    """
    candidates = list(candidates)
    if not candidates:
        raise NoCandidate("no eligible serving cell")
    rsrp = np.asarray(rsrp, dtype=float)
    order = np.argsort(candidates, kind="stable")
    cands = np.asarray(candidates)[order]
    vals = rsrp[order]
    best = int(np.argmax(vals))
    if serving is None or serving not in candidates:
        return int(cands[best])
    cur = float(vals[list(cands).index(serving)])
    if vals[best] > cur + hysteresis_db:
        return int(cands[best])
    return serving


@dataclass
class AttachmentTable:
    serving: dict[int, int] = field(default_factory=dict)
    last_eval: dict[int, int] = field(default_factory=dict)

    def cell_of(self, node: int) -> int | None:
        return self.serving.get(node)


@dataclass(frozen=True)
class Route:
    hops: tuple[tuple[int, int, int], ...]   # (cell, served node, bearer kind)

    def __len__(self) -> int:
        return len(self.hops)


@dataclass(frozen=True)
class AttachmentEvent:
    slot: int
    node: int
    old_cell: int | None
    new_cell: int
    old_rsrp_dbm: float | None
    new_rsrp_dbm: float


@dataclass(frozen=True)
class LinkProfile:
    direct_ues: int
    attached_mts: int
    backhaul_served: int

    @property
    def total(self) -> int:
        return self.direct_ues + self.backhaul_served

    @property
    def access_fraction(self) -> float:
        return self.direct_ues / self.total if self.total else 1.0


class Network:
    """Attachment state, bearer registry and packet routing for one run."""

    def __init__(self, nodes: tuple[NodeDescriptor, ...], bus_nodes: dict[int, tuple[int, int]],
                 preemptive_bsr: bool = True, discard_dl_on_migration: bool = False):
        self.nodes = nodes
        self.kind = [n.kind for n in nodes]
        self.donors = [n.id for n in nodes if n.kind is NodeKind.IAB_DONOR]
        self.picos = [n.id for n in nodes if n.kind is NodeKind.PICO_GNB]
        self.dus = [n.id for n in nodes if n.kind is NodeKind.MIAB_DU]
        self.mts = [n.id for n in nodes if n.kind is NodeKind.MIAB_MT]
        self.ues = [n.id for n in nodes if n.is_ue]
        self.cells = sorted(self.donors + self.picos + self.dus)
        self.mt_of_du = {du: mt for du, mt in bus_nodes.values()}
        self.du_of_mt = {mt: du for du, mt in bus_nodes.values()}
        self.iab_donors = [d for d in self.donors if nodes[d].iab_support]
        self.preemptive_bsr = preemptive_bsr
        self.discard_dl_on_migration = discard_dl_on_migration
        self.attach = AttachmentTable()
        self.bearers: dict[tuple, BearerQueue] = {}
        self.by_cell: dict[int, list[BearerQueue]] = {c: [] for c in self.cells}
        self.events: list[AttachmentEvent] = []
        self.dropped_bits = [0, 0]
        self.stale_routes = 0
        self.migrations = 0
        self.handovers = 0

    # bearers -----------------------------------------------------------------
    def bearer(self, cell: int, node: int, direction: Direction) -> BearerQueue:
        key = (cell, node, direction)
        b = self.bearers.get(key)
        if b is None:
            kind = BACKHAUL if self.kind[node] is NodeKind.MIAB_MT else ACCESS
            b = BearerQueue(len(self.bearers), cell, node, direction, kind)
            self.bearers[key] = b
            self.by_cell[cell].append(b)
        return b

    def queued_bits(self, direction: Direction) -> int:
        return sum(b.queued_bits for b in self.bearers.values() if b.direction is direction)

    def queued_packets(self):
        for b in self.bearers.values():
            yield from b.packets

    # routing -----------------------------------------------------------------
    def anchor(self, node: int) -> int:
        """Wired cell where a node's traffic enters or leaves the network."""
        cell = self.attach.serving[node]
        if self.kind[cell] is NodeKind.MIAB_DU:
            return self.attach.serving[self.mt_of_du[cell]]
        return cell

    def route(self, ue: int, direction: Direction) -> Route:
        cell = self.attach.serving.get(ue)
        if cell is None:
            raise StaleRoute(f"UE {ue} has no serving cell")
        if self.kind[cell] is NodeKind.MIAB_DU:
            mt = self.mt_of_du[cell]
            donor = self.attach.serving[mt]
            if direction is Direction.DL:
                return Route(((donor, mt, BACKHAUL), (cell, ue, ACCESS)))
            return Route(((cell, ue, ACCESS), (donor, mt, BACKHAUL)))
        return Route(((cell, ue, ACCESS),))

    def inject(self, p: Packet, slot: int) -> BearerQueue:
        cell, node, _ = self.route(p.ue, p.direction).hops[0]
        p.ready = max(p.ready, slot)
        b = self.bearer(cell, node, p.direction)
        b.push(p)
        return b

    def bsr_ready_slot(self, slot: int) -> int:
        """Ready slot at the MT's upstream queue for a packet received at the DU in ``slot``."""
        if self.preemptive_bsr:
            return slot + 1
        # the report rides the next backhaul UL opportunity; the grant follows it
        return IAB_BACKHAUL.next_slot(Role.UL, slot + 1) + 1

    def forward(self, p: Packet, b: BearerQueue, slot: int) -> bool:
        """Advance ``p`` after it left ``b`` in ``slot``. Returns True when it reached its sink."""
        p.hops += 1
        if b.kind is BACKHAUL and p.direction is Direction.DL:
            du = self.du_of_mt[b.node]
            if self.attach.serving.get(p.ue) != du:
                # UE left this node while the packet was on the backhaul
                self.stale_routes += 1
                p.queue_free = False
                p.ready = slot + 1
                self.inject(p, slot + 1)
                return False
            p.ready = slot + 1
            self.bearer(du, p.ue, Direction.DL).push(p)
            return False
        if b.kind is ACCESS and p.direction is Direction.UL and self.kind[b.cell] is NodeKind.MIAB_DU:
            mt = self.mt_of_du[b.cell]
            donor = self.attach.serving[mt]
            p.ready = self.bsr_ready_slot(slot)
            self.bearer(donor, mt, Direction.UL).push(p)
            return False
        return True

    # attachment changes -------------------------------------------------------
    def handover_ue(self, ue: int, new_cell: int, slot: int) -> int:
        """Re-home a UE; its queued packets follow with creation slots preserved."""
        old = self.attach.serving.get(ue)
        self.attach.serving[ue] = new_cell
        if old is None or old == new_cell:
            return 0
        self.handovers += 1
        moved = []
        for d in (Direction.DL, Direction.UL):
            b = self.bearers.get((old, ue, d))
            if b is not None:
                moved.extend(b.extract(lambda p: True))
        if self.kind[old] is NodeKind.MIAB_DU:
            mt = self.mt_of_du[old]
            donor = self.attach.serving[mt]
            b = self.bearers.get((donor, mt, Direction.DL))
            if b is not None:
                moved.extend(b.extract(lambda p, ue=ue: p.ue == ue))
        moved.sort(key=lambda p: p.id)
        for p in moved:
            # re-homing is a wait outside the frame structure
            p.queue_free = False
            p.ready = slot
            self.inject(p, slot)
        return len(moved)

    def migrate_node(self, mt: int, new_donor: int, slot: int) -> int:
        """Move an MT to a new donor together with its aggregated backhaul queues."""
        if new_donor not in self.iab_donors:
            raise NoCandidate(f"cell {new_donor} cannot parent an mIAB node")
        old = self.attach.serving.get(mt)
        self.attach.serving[mt] = new_donor
        if old is None or old == new_donor:
            return 0
        self.migrations += 1
        moved = 0
        for d in (Direction.DL, Direction.UL):
            b = self.bearers.get((old, mt, d))
            if b is None or not len(b):
                continue
            pkts = b.extract(lambda p: True)
            if d is Direction.DL and self.discard_dl_on_migration:
                self.dropped_bits[d] += sum(p.size for p in pkts)
                continue
            nb = self.bearer(new_donor, mt, d)
            for p in pkts:
                if slot > p.ready:
                    p.queue_free = False
                p.ready = max(p.ready, slot)
                nb.push(p)
            moved += len(pkts)
        return moved

    def integrate_miab_node(self, mt: int, rsrp: dict[int, float], slot: int) -> int:
        cands = [d for d in self.iab_donors]
        donor = evaluate_attachment(None, cands, [rsrp[c] for c in cands])
        self.attach.serving[mt] = donor
        self.attach.last_eval[mt] = slot
        self.events.append(AttachmentEvent(slot, mt, None, donor, None, rsrp[donor]))
        return donor

    # reporting ----------------------------------------------------------------
    def donor_link_profile(self, donor: int) -> LinkProfile:
        direct = sum(1 for u in self.ues if self.attach.serving.get(u) == donor)
        mts = [m for m in self.mts if self.attach.serving.get(m) == donor]
        dus = {self.du_of_mt[m] for m in mts}
        indirect = sum(1 for u in self.ues if self.attach.serving.get(u) in dus)
        return LinkProfile(direct, len(mts), indirect)

    def served_counts(self) -> Counter:
        return Counter(self.attach.serving.get(u) for u in self.ues)
