"""Large-scale link state and correlated small-scale fading.

Pathloss, LOS probability and shadowing follow the 3GPP TR 38.901 UMa, UMi
and InH (open office) models. Shadowing and the LOS draw are Gaussian
processes indexed by how far the pair geometry has moved, so repeated
refreshes stay spatially consistent.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
from scipy.special import j0, ndtr

from .antenna import array_gain_matrix, element_gain_db
from .geometry import BUS_HEIGHT_M, BUS_LENGTH_M, BUS_WIDTH_M
from .scenario import ArrayType, NodeDescriptor, NodeKind

SPEED_OF_LIGHT = 299_792_458.0
BODY_LOSS_DB = 40.1
MAX_CROSSINGS = 2
RICIAN_K_DB = 10.0


class UnsupportedPair(ValueError):
    pass


class RangeError(ValueError):
    pass


class ChannelType(enum.IntEnum):
    UMA = 0
    UMI = 1
    INH = 2


class LosState(enum.IntEnum):
    NLOS = 0
    LOS = 1


# sigma_SF [dB] and decorrelation distance [m], indexed [type][los]
SHADOW_SIGMA_DB = {ChannelType.UMA: (6.0, 4.0), ChannelType.UMI: (7.82, 4.0), ChannelType.INH: (8.03, 3.0)}
SHADOW_DCORR_M = {ChannelType.UMA: (50.0, 37.0), ChannelType.UMI: (13.0, 10.0), ChannelType.INH: (6.0, 10.0)}
LOS_DCORR_M = {ChannelType.UMA: 50.0, ChannelType.UMI: 50.0, ChannelType.INH: 10.0}
MIN_D2D_M = {ChannelType.UMA: 10.0, ChannelType.UMI: 10.0}
MIN_D3D_M = {ChannelType.INH: 1.0}


@dataclass(frozen=True)
class LinkBudget:
    channel_type: ChannelType
    los: LosState
    pathloss_db: float
    shadowing_db: float
    penetration_db: float
    tx_array_gain_db: float
    rx_array_gain_db: float
    small_scale_db: float = 0.0

    @property
    def total_loss_db(self) -> float:
        return self.pathloss_db + self.shadowing_db + self.penetration_db


def classify_link(a: NodeDescriptor, b: NodeDescriptor) -> ChannelType:
    """Channel family for a node pair (order-insensitive)."""
    if a.id == b.id:
        raise UnsupportedPair("a node has no link to itself")
    kinds = {a.kind, b.kind}
    if kinds == {NodeKind.MIAB_DU} or kinds == {NodeKind.MIAB_MT}:
        raise UnsupportedPair("DU-DU and MT-MT links are never scheduled")
    return _classify(a.kind, b.kind, a.bus_id is not None and a.bus_id == b.bus_id)


def _classify(ka: NodeKind, kb: NodeKind, same_bus: bool) -> ChannelType:
    kinds = {ka, kb}
    if NodeKind.IAB_DONOR in kinds:
        return ChannelType.UMA
    if kinds == {NodeKind.MIAB_DU, NodeKind.PASSENGER} and same_bus:
        return ChannelType.INH
    return ChannelType.UMI


def classify_matrix(nodes: tuple[NodeDescriptor, ...]) -> np.ndarray:
    """Pairwise channel types; pairs that are never scheduled get UMi."""
    n = len(nodes)
    out = np.full((n, n), int(ChannelType.UMI), dtype=np.int8)
    for i in range(n):
        for j in range(i + 1, n):
            a, b = nodes[i], nodes[j]
            same_bus = a.bus_id is not None and a.bus_id == b.bus_id
            out[i, j] = out[j, i] = _classify(a.kind, b.kind, same_bus)
    return out


def pathloss_db(ctype, los, d3d, fc_hz, h_tx, h_rx, clamp: bool = True):
    """38.901 Table 7.4.1-1 pathloss. Works on scalars or broadcastable arrays."""
    pl, clamped = pathloss_with_clamp(ctype, los, d3d, fc_hz, h_tx, h_rx)
    if not clamp and np.any(clamped):
        raise RangeError("distance below the model's minimum validity range")
    return float(pl) if np.ndim(pl) == 0 else pl


def pathloss_with_clamp(ctype, los, d3d, fc_hz, h_tx, h_rx):
    ctype = np.asarray(ctype)
    los = np.asarray(los).astype(bool)
    d3d = np.asarray(d3d, dtype=float)
    h_bs = np.maximum(h_tx, h_rx).astype(float)
    h_ut = np.minimum(h_tx, h_rx).astype(float)
    dh = h_bs - h_ut
    d2d = np.sqrt(np.maximum(d3d ** 2 - dh ** 2, 0.0))
    fc = fc_hz / 1e9

    outdoor = ctype != ChannelType.INH
    clamped = np.where(outdoor, d2d < MIN_D2D_M[ChannelType.UMA], d3d < MIN_D3D_M[ChannelType.INH])
    d2d = np.where(outdoor, np.maximum(d2d, MIN_D2D_M[ChannelType.UMA]), d2d)
    d3d = np.where(outdoor, np.sqrt(d2d ** 2 + dh ** 2), np.maximum(d3d, MIN_D3D_M[ChannelType.INH]))
    log_d3 = np.log10(d3d)
    log_fc = np.log10(fc)

    # effective environment height of 1 m for both outdoor families
    d_bp = 4.0 * (h_bs - 1.0) * (h_ut - 1.0) * fc_hz / SPEED_OF_LIGHT
    bp_term = np.log10(np.maximum(d_bp, 1e-9) ** 2 + dh ** 2)

    uma_los = np.where(d2d <= d_bp, 28.0 + 22.0 * log_d3 + 20.0 * log_fc,
                       28.0 + 40.0 * log_d3 + 20.0 * log_fc - 9.0 * bp_term)
    uma_nlos = np.maximum(uma_los, 13.54 + 39.08 * log_d3 + 20.0 * log_fc - 0.6 * (h_ut - 1.5))
    umi_los = np.where(d2d <= d_bp, 32.4 + 21.0 * log_d3 + 20.0 * log_fc,
                       32.4 + 40.0 * log_d3 + 20.0 * log_fc - 9.5 * bp_term)
    umi_nlos = np.maximum(umi_los, 35.3 * log_d3 + 22.4 + 21.3 * log_fc - 0.3 * (h_ut - 1.5))
    inh_los = 32.4 + 17.3 * log_d3 + 20.0 * log_fc
    inh_nlos = np.maximum(inh_los, 38.3 * log_d3 + 17.30 + 24.9 * log_fc)

    pl = np.select(
        [ctype == ChannelType.UMA, ctype == ChannelType.UMI],
        [np.where(los, uma_los, uma_nlos), np.where(los, umi_los, umi_nlos)],
        default=np.where(los, inh_los, inh_nlos),
    )
    return pl, clamped


def los_probability(ctype, d2d, h_ut=1.5):
    ctype = np.asarray(ctype)
    d = np.maximum(np.asarray(d2d, dtype=float), 1e-9)
    h_ut = np.asarray(h_ut, dtype=float)
    with np.errstate(over="ignore"):
        c_prime = np.where(h_ut <= 13.0, 0.0, ((np.clip(h_ut, 13.0, 23.0) - 13.0) / 10.0) ** 1.5)
        uma = np.where(d <= 18.0, 1.0,
                       (18.0 / d + np.exp(-d / 63.0) * (1.0 - 18.0 / d))
                       * (1.0 + c_prime * 1.25 * (d / 100.0) ** 3 * np.exp(-d / 150.0)))
        umi = np.where(d <= 18.0, 1.0, 18.0 / d + np.exp(-d / 36.0) * (1.0 - 18.0 / d))
        inh = np.where(d <= 5.0, 1.0,
                       np.where(d <= 49.0, np.exp(-(d - 5.0) / 70.8), np.exp(-(d - 49.0) / 211.7) * 0.54))
    p = np.select([ctype == ChannelType.UMA, ctype == ChannelType.UMI], [uma, umi], default=inh)
    return np.clip(p, 0.0, 1.0)


def draw_los_state(ctype, d2d, h_ut, gauss, crossings):
    """LOS when the pair's correlated uniform falls under P_LOS; body crossings force NLOS."""
    u = ndtr(np.asarray(gauss, dtype=float))
    return (u < los_probability(ctype, d2d, h_ut)) & (np.asarray(crossings) == 0)


@dataclass(frozen=True)
class BusBody:
    center: tuple[float, float]
    heading: tuple[float, float]


def _box_local(points: np.ndarray, body: BusBody) -> np.ndarray:
    cx, cy = body.center
    hx, hy = body.heading
    rx, ry = points[..., 0] - cx, points[..., 1] - cy
    return np.stack([rx * hx + ry * hy, -rx * hy + ry * hx, points[..., 2]], axis=-1)


_HALF = np.array([BUS_LENGTH_M / 2, BUS_WIDTH_M / 2, BUS_HEIGHT_M / 2])
_MID = np.array([0.0, 0.0, BUS_HEIGHT_M / 2])


def _inside(local: np.ndarray) -> np.ndarray:
    return np.all(np.abs(local - _MID) <= _HALF, axis=-1)


def _segment_hits_box(la: np.ndarray, lb: np.ndarray) -> np.ndarray:
    """Slab test for segments la->lb (..., 3) against the centred body box."""
    d = lb - la
    lo = (_MID - _HALF) - la
    hi = (_MID + _HALF) - la
    with np.errstate(divide="ignore", invalid="ignore"):
        t1 = np.where(d != 0, lo / d, np.where(lo <= 0, -np.inf, np.inf))
        t2 = np.where(d != 0, hi / d, np.where(hi >= 0, np.inf, -np.inf))
    t_enter = np.max(np.minimum(t1, t2), axis=-1)
    t_exit = np.min(np.maximum(t1, t2), axis=-1)
    return (t_enter <= t_exit) & (t_exit >= 0.0) & (t_enter <= 1.0)


def crossings_for_segments(a: np.ndarray, b: np.ndarray, bodies: list[BusBody]) -> np.ndarray:
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = np.atleast_2d(np.asarray(b, dtype=float))
    count = np.zeros(a.shape[0], dtype=np.int64)
    for body in bodies:
        la, lb = _box_local(a, body), _box_local(b, body)
        in_a, in_b = _inside(la), _inside(lb)
        through = ~in_a & ~in_b & _segment_hits_box(la, lb)
        count += (in_a ^ in_b) | through
    return np.minimum(count, MAX_CROSSINGS)


def penetration_crossings(a, b, bodies: list[BusBody]) -> int:
    """Bus bodies crossed by the segment a-b; a body holding both endpoints does not count."""
    return int(crossings_for_segments(a, b, bodies)[0])


def rsrp_dbm(tx: NodeDescriptor, rx: NodeDescriptor, budget: LinkBudget, num_rbs: int = 66) -> float:
    """Wideband per-RE received power of a cell's reference signal (no fast fading)."""
    per_re = tx.tx_power_dbm - 10.0 * np.log10(num_rbs * 12)
    return float(per_re + budget.tx_array_gain_db + budget.rx_array_gain_db
                 - budget.pathloss_db - budget.shadowing_db - budget.penetration_db)


class ChannelModel:
    """Owns shadowing, LOS and fading state for one simulation instance."""

    def __init__(self, nodes: tuple[NodeDescriptor, ...], fc_hz: float, slot_s: float, num_rbs: int,
                 rng: np.random.Generator, fading_rng: np.random.Generator):
        self.nodes = nodes
        self.n = len(nodes)
        self.fc_hz = fc_hz
        self.slot_s = slot_s
        self.num_rbs = num_rbs
        self.rng = rng
        self.fading_rng = fading_rng
        self.ctype = classify_matrix(nodes)
        self.iu = np.triu_indices(self.n, 1)
        self.heights = np.array([nd.height_m for nd in nodes])
        self.tx_dbm = np.array([nd.tx_power_dbm for nd in nodes])
        n_pairs = len(self.iu[0])
        # independent processes per pair: LOS draw, shadowing in LOS, shadowing in NLOS
        self._g_los = rng.standard_normal(n_pairs)
        self._g_sf = rng.standard_normal((2, n_pairs))
        self._last_rel = None
        self.clamp_count = 0
        self.refreshes = 0
        # fading state, keyed by upper-triangle (i < j)
        self._h = np.zeros((self.n, self.n), dtype=complex)
        self._h_slot = np.full((self.n, self.n), -1, dtype=np.int64)
        self._array_nodes = [nd.id for nd in nodes if nd.array is not ArrayType.SINGLE]

    def _mirror(self, values: np.ndarray, diag=0.0, dtype=float) -> np.ndarray:
        m = np.full((self.n, self.n), diag, dtype=dtype)
        m[self.iu] = values
        m[(self.iu[1], self.iu[0])] = values
        return m

    def refresh(self, positions: np.ndarray, orientations: np.ndarray, velocities: np.ndarray,
                bodies: list[BusBody]) -> None:
        """Recompute all large-scale state from the current geometry.

        ``orientations`` holds each node's antenna azimuth in degrees.
        """
        i, j = self.iu
        pa, pb = positions[i], positions[j]
        rel = pb - pa
        d3d = np.linalg.norm(rel, axis=1)
        d2d = np.linalg.norm(rel[:, :2], axis=1)
        ctype = self.ctype[i, j]
        h_ut = np.minimum(self.heights[i], self.heights[j])

        if self._last_rel is None:
            moved = np.full(len(i), np.inf)
        else:
            moved = np.linalg.norm(rel - self._last_rel, axis=1)
        self._last_rel = rel

        dcorr_los = np.array([LOS_DCORR_M[ChannelType(c)] for c in range(3)])[ctype]
        self._g_los = self._ar_step(self._g_los, moved, dcorr_los)
        for s in (0, 1):
            dc = np.array([SHADOW_DCORR_M[ChannelType(c)][s] for c in range(3)])[ctype]
            self._g_sf[s] = self._ar_step(self._g_sf[s], moved, dc)

        crossings = crossings_for_segments(pa, pb, bodies)
        los = draw_los_state(ctype, d2d, h_ut, self._g_los, crossings)
        sigma = np.array([[SHADOW_SIGMA_DB[ChannelType(c)][s] for s in (0, 1)] for c in range(3)])
        sf = np.where(los, sigma[ctype, 1] * self._g_sf[1], sigma[ctype, 0] * self._g_sf[0])
        pl, clamped = pathloss_with_clamp(ctype, los, d3d, self.fc_hz, self.heights[i], self.heights[j])
        self.clamp_count += int(clamped.sum())
        pen = BODY_LOSS_DB * crossings

        self.los = self._mirror(los, diag=False, dtype=bool)
        self.crossings = self._mirror(crossings, diag=0, dtype=np.int64)
        self.pathloss = self._mirror(pl)
        self.shadowing = self._mirror(sf)
        self.penetration = self._mirror(pen)
        loss = pl + sf + pen
        self.loss_db = self._mirror(loss)
        self.gain_lin = self._mirror(10.0 ** (-loss / 10.0))

        dirs = positions[None, :, :] - positions[:, None, :]
        norm = np.linalg.norm(dirs, axis=2, keepdims=True)
        dirs = np.where(norm > 0, dirs / np.where(norm > 0, norm, 1.0), np.array([1.0, 0.0, 0.0]))
        g3 = np.ones((self.n, self.n, self.n))
        for x in self._array_nodes:
            nd = self.nodes[x]
            el = 10.0 ** (element_gain_db(dirs[x], orientations[x], nd.tilt_deg, nd.element_pattern,
                                          nd.max_element_gain_dbi) / 10.0)
            g3[x] = array_gain_matrix(nd.array, orientations[x], dirs[x]) * el[None, :]
        self.g3 = g3
        self.positions = positions

        v_rel = np.linalg.norm(velocities[None, :, :] - velocities[:, None, :], axis=2)
        fd = v_rel * self.fc_hz / SPEED_OF_LIGHT
        self.rho = np.clip(j0(2 * np.pi * fd * self.slot_s), 0.0, 1.0)
        self.refreshes += 1

    def _ar_step(self, g, moved, dcorr):
        rho = np.exp(-moved / dcorr)
        return rho * g + np.sqrt(1.0 - rho ** 2) * self.rng.standard_normal(g.shape)

    def budget(self, tx: int, rx: int, steer_tx: int | None = None, steer_rx: int | None = None) -> LinkBudget:
        steer_tx = rx if steer_tx is None else steer_tx
        steer_rx = tx if steer_rx is None else steer_rx
        return LinkBudget(
            channel_type=ChannelType(int(self.ctype[tx, rx])),
            los=LosState(int(self.los[tx, rx])),
            pathloss_db=float(self.pathloss[tx, rx]),
            shadowing_db=float(self.shadowing[tx, rx]),
            penetration_db=float(self.penetration[tx, rx]),
            tx_array_gain_db=float(10 * np.log10(self.g3[tx, steer_tx, rx])),
            rx_array_gain_db=float(10 * np.log10(self.g3[rx, steer_rx, tx])),
        )

    def rsrp_matrix(self, cells: list[int]) -> np.ndarray:
        """RSRP [dBm] from each listed cell to every node, beams pointed at the receiver."""
        cells = np.asarray(cells, dtype=np.int64)
        idx = np.arange(self.n)
        tx_gain = self.g3[cells[:, None], idx[None, :], idx[None, :]]
        rx_gain = self.g3[idx[None, :], cells[:, None], cells[:, None]]
        per_re = self.tx_dbm[cells] - 10.0 * np.log10(self.num_rbs * 12)
        with np.errstate(divide="ignore"):
            return (per_re[:, None] + 10 * np.log10(tx_gain) + 10 * np.log10(rx_gain)
                    - self.loss_db[cells])

    def fading_power(self, tx: np.ndarray, rx: np.ndarray, slot: int) -> np.ndarray:
        """Small-scale power gain |h|^2 for each (tx, rx), advanced to ``slot``."""
        tx = np.asarray(tx, dtype=np.int64)
        rx = np.asarray(rx, dtype=np.int64)
        a, b = np.minimum(tx, rx), np.maximum(tx, rx)
        key = a * self.n + b
        uniq, inv = np.unique(key, return_inverse=True)
        ua, ub = uniq // self.n, uniq % self.n
        last = self._h_slot[ua, ub]
        stale = last < slot
        if np.any(stale):
            sa, sb, sl = ua[stale], ub[stale], last[stale]
            w = (self.fading_rng.standard_normal(len(sa)) + 1j * self.fading_rng.standard_normal(len(sa))) / np.sqrt(2)
            fresh = sl < 0
            rho = np.where(fresh, 0.0, self.rho[sa, sb] ** np.where(fresh, 1, slot - sl))
            self._h[sa, sb] = rho * self._h[sa, sb] + np.sqrt(1.0 - rho ** 2) * w
            self._h_slot[sa, sb] = slot
        g = self._h[ua, ub]
        k = 10.0 ** (RICIAN_K_DB / 10.0)
        los = self.los[ua, ub]
        h = np.where(los, np.sqrt(k / (k + 1)) + np.sqrt(1.0 / (k + 1)) * g, g)
        return (np.abs(h) ** 2)[inv]
