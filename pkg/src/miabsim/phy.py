"""Link abstraction: SINR, MCS choice, block errors, outer loop and SVD streams."""

from __future__ import annotations

import bisect
import csv
import enum
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

RE_PER_RB = 12 * 14
THERMAL_DBM_HZ = -174.0
NOISE_FIGURE_DB = 9.0
TARGET_BLER = 0.10
BLER_DB_PER_DECADE = 1.5
ERROR_STEP_DB = -1.0
SUCCESS_STEP_DB = 0.1
MAX_STREAMS = 8

_A = math.log(10.0) / BLER_DB_PER_DECADE
_X0 = -math.log(1.0 / TARGET_BLER - 1.0) / _A


class DegenerateChannel(RuntimeError):
    pass


class Outcome(enum.IntEnum):
    SUCCESS = 0
    ERROR = 1


@dataclass(frozen=True)
class McsTable:
    index: np.ndarray
    efficiency: np.ndarray
    threshold_db: np.ndarray
    name: str = "mcs_table_v1"

    def __post_init__(self):
        if len(self.index) == 0:
            raise ValueError("empty MCS table")
        if np.any(np.diff(self.efficiency) <= 0) or np.any(np.diff(self.threshold_db) <= 0):
            raise ValueError("MCS table must increase strictly in efficiency and threshold")
        if np.any(np.diff(self.index) != 1):
            raise ValueError("MCS indices must be consecutive")
        # plain-Python copies for the per-grant hot path
        object.__setattr__(self, "_thr", [float(x) for x in self.threshold_db])
        object.__setattr__(self, "_bpr", [int(math.floor(RE_PER_RB * e)) for e in self.efficiency])
        object.__setattr__(self, "_lo", int(self.index[0]))

    def select_scalar(self, sinr_db: float) -> int:
        pos = bisect.bisect_right(self._thr, sinr_db) - 1
        return self._lo + (pos if pos > 0 else 0)

    def bpr_scalar(self, mcs: int) -> int:
        return self._bpr[mcs - self._lo]

    def thr_scalar(self, mcs: int) -> float:
        return self._thr[mcs - self._lo]

    @classmethod
    def from_csv(cls, path: str | Path | None = None) -> "McsTable":
        if path is None:
            text = resources.files("miabsim").joinpath("data/mcs_table_v1.csv").read_text()
            name = "mcs_table_v1"
        else:
            text = Path(path).read_text()
            name = Path(path).stem
        rows = list(csv.DictReader(text.splitlines()))
        return cls(
            index=np.array([int(r["mcs_index"]) for r in rows]),
            efficiency=np.array([float(r["efficiency"]) for r in rows]),
            threshold_db=np.array([float(r["sinr_threshold_db"]) for r in rows]),
            name=name,
        )

    @property
    def lowest(self) -> int:
        return int(self.index[0])

    @property
    def top(self) -> int:
        return int(self.index[-1])

    def position(self, mcs):
        return np.asarray(mcs) - self.lowest

    def select(self, sinr_db):
        """Highest index whose threshold is met; floored at the lowest entry."""
        pos = np.searchsorted(self.threshold_db, sinr_db, side="right") - 1
        pos = np.clip(pos, 0, len(self.index) - 1)
        return self.index[pos] if np.ndim(pos) else int(self.index[pos])

    def eff(self, mcs):
        return self.efficiency[self.position(mcs)]

    def threshold(self, mcs):
        return self.threshold_db[self.position(mcs)]

    def bits_per_rb(self, mcs) -> np.ndarray:
        return np.floor(RE_PER_RB * self.eff(mcs)).astype(np.int64)


_DEFAULT_TABLE: McsTable | None = None


def default_table() -> McsTable:
    global _DEFAULT_TABLE
    if _DEFAULT_TABLE is None:
        _DEFAULT_TABLE = McsTable.from_csv()
    return _DEFAULT_TABLE


def noise_dbm(bandwidth_hz: float, nf_db: float = NOISE_FIGURE_DB) -> float:
    return THERMAL_DBM_HZ + 10.0 * math.log10(bandwidth_hz) + nf_db


def db2lin(x):
    return 10.0 ** (np.asarray(x) / 10.0)


def lin2db(x):
    return 10.0 * np.log10(x)


def sinr_snr_db(signal_dbm: float, interferers_dbm, noise_dbm_: float) -> tuple[float, float]:
    s = db2lin(signal_dbm)
    n = db2lin(noise_dbm_)
    i = float(np.sum(db2lin(np.asarray(interferers_dbm, dtype=float)))) if len(interferers_dbm) else 0.0
    return float(lin2db(s / (n + i))), float(lin2db(s / n))


def select_mcs(est_sinr_db: float, offset_db: float = 0.0, table: McsTable | None = None) -> int:
    table = table or default_table()
    return table.select(est_sinr_db + offset_db)


def bler(margin_db):
    """Block error probability vs. SINR margin over the MCS threshold (0.1 at zero margin)."""
    with np.errstate(over="ignore"):
        return 1.0 / (1.0 + np.exp(_A * (np.asarray(margin_db, dtype=float) - _X0)))


def realize_transmission(mcs: int, actual_sinr_db: float, rng: np.random.Generator,
                         table: McsTable | None = None) -> Outcome:
    table = table or default_table()
    p = bler(actual_sinr_db - table.threshold(mcs))
    return Outcome.ERROR if rng.random() < p else Outcome.SUCCESS


def update_outer_loop(offset_db: float, outcome: Outcome) -> float:
    return offset_db + (ERROR_STEP_DB if outcome is Outcome.ERROR else SUCCESS_STEP_DB)


@dataclass
class OuterLoop:
    """Per-link SINR offsets keyed by (serving cell, served node, direction).

    Steps that cannot change the selection are skipped: successes while the
    adjusted estimate already clears the top threshold, errors while it is
    already below the lowest one. This keeps the offset from winding up on
    saturated links.
    """

    table: McsTable
    offsets: dict = field(default_factory=dict)
    updates: int = 0

    def offset(self, key) -> float:
        return self.offsets.get(key, 0.0)

    def select(self, key, est_sinr_db: float) -> int:
        return self.table.select_scalar(est_sinr_db + self.offsets.get(key, 0.0))

    def update(self, key, outcome: Outcome, est_sinr_db: float | None = None) -> float:
        off = self.offsets.get(key, 0.0)
        if est_sinr_db is not None:
            adj = est_sinr_db + off
            if outcome is Outcome.SUCCESS and adj >= self.table._thr[-1]:
                return off
            if outcome is Outcome.ERROR and adj < self.table._thr[0]:
                return off
        off = update_outer_loop(off, outcome)
        self.offsets[key] = off
        self.updates += 1
        return off


def tb_bits(mcs, num_rbs: int, streams: int = 1, table: McsTable | None = None) -> int:
    """Transport block size with no control overhead."""
    table = table or default_table()
    if num_rbs <= 0 or streams <= 0:
        return 0
    return int(table.bits_per_rb(mcs)) * int(num_rbs) * int(streams)


@dataclass(frozen=True)
class StreamSet:
    singular_values: np.ndarray
    mcs: np.ndarray
    sinr_db: np.ndarray
    degenerate: bool = False

    @property
    def k(self) -> int:
        return len(self.mcs)

    def bits_per_rb(self, table: McsTable) -> int:
        return int(np.sum(table.bits_per_rb(self.mcs)))


def stream_sinr_db(singular_values: np.ndarray, p_rb_mw: float, ni_mw: float) -> np.ndarray:
    k = len(singular_values)
    with np.errstate(divide="ignore"):
        return lin2db(singular_values ** 2 * p_rb_mw / k / ni_mw)


def backhaul_streams(H_or_sv, p_rb_mw: float, ni_mw: float, table: McsTable | None = None,
                     offset_db: float = 0.0, max_streams: int = MAX_STREAMS,
                     strict: bool = False) -> StreamSet:
    """Pick SVD streams under an equal power split.

    ``H_or_sv`` is either the channel matrix (large-scale gain included) or
    its singular values. Streams whose MCS would be the lowest index are
    dropped and the split recomputed until the set is stable.
    """
    table = table or default_table()
    arr = np.asarray(H_or_sv)
    sv = np.linalg.svd(arr, compute_uv=False) if arr.ndim == 2 else np.sort(arr)[::-1]
    if sv.size == 0 or sv[0] <= 0:
        raise DegenerateChannel("zero channel")
    tol = sv[0] * max(arr.shape) * np.finfo(float).eps
    kept = sv[:max_streams][sv[:max_streams] > tol]
    while True:
        sinr = stream_sinr_db(kept, p_rb_mw, ni_mw)
        mcs = np.atleast_1d(table.select(sinr + offset_db))
        ok = mcs > table.lowest
        if ok.all():
            return StreamSet(kept, mcs, sinr)
        kept = kept[ok]
        if kept.size == 0:
            if strict:
                raise DegenerateChannel("no stream reaches an MCS above the lowest")
            sinr = stream_sinr_db(sv[:1], p_rb_mw, ni_mw)
            return StreamSet(sv[:1], np.array([table.lowest]), sinr, degenerate=True)


def backhaul_matrix(a_rx: np.ndarray, a_tx: np.ndarray, los: bool, rng: np.random.Generator,
                    k_factor_db: float = 10.0) -> np.ndarray:
    """Unit-average-gain MIMO channel: Rician LOS term plus i.i.d. scattering."""
    n_r, n_t = len(a_rx), len(a_tx)
    g = (rng.standard_normal((n_r, n_t)) + 1j * rng.standard_normal((n_r, n_t))) / math.sqrt(2.0)
    if not los:
        return g
    k = 10.0 ** (k_factor_db / 10.0)
    return math.sqrt(k / (k + 1)) * np.outer(a_rx, a_tx.conj()) + math.sqrt(1.0 / (k + 1)) * g
