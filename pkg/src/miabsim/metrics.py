"""Streaming collectors, CSV/JSON export and pooling of replication outputs."""

from __future__ import annotations

import csv
import json
from array import array
from collections import Counter, defaultdict
from pathlib import Path

import numpy as np

from .traffic import Direction

UE_CLASSES = ("pedestrian", "passenger")
SINR_CLASSES = ("pedestrian", "passenger", "backhaul")
LINK_CLASSES = ("donor_pedestrian", "donor_passenger", "pico_pedestrian", "pico_passenger",
                "du_pedestrian", "du_passenger", "backhaul")
CELL_KIND_CODES = {"donor": 0, "pico": 1, "du": 2}
DIRS = ("dl", "ul")


class DoubleDelivery(RuntimeError):
    pass


class IncompatibleRuns(ValueError):
    pass


class MetricStore:
    """Per-run statistics. Only packets created at or after ``warmup`` are counted."""

    def __init__(self, ue_class: dict[int, str], warmup: int, measured_slots: int, slot_s: float,
                 num_mcs: int = 15):
        self.ue_class = dict(ue_class)
        self.warmup = warmup
        self.measured_slots = measured_slots
        self.slot_s = slot_s
        self.delivered_bits = {u: [0, 0] for u in ue_class}
        self.latency = {(u, d): array("i") for u in ue_class for d in (0, 1)}
        self.queue_free = {(u, d): array("b") for u in ue_class for d in (0, 1)}
        self.hops = {(u, d): array("b") for u in ue_class for d in (0, 1)}
        self.delivered_ids: set[int] | None = None
        # one row per access or backhaul transmission
        self.s_class = array("b")
        self.s_dir = array("b")
        self.s_cell = array("b")
        self.s_mt_tx = array("b")
        self.s_sinr = array("f")
        self.s_snr = array("f")
        self.mcs = {(c, d): [[0, 0] for _ in range(num_mcs + 1)] for c in LINK_CLASSES for d in (0, 1)}
        self.profile = Counter()
        self.tdd_usage: dict[str, list[int]] = defaultdict(lambda: [0, 0, 0])
        self.censored = [0, 0]
        self.transmissions = 0

    def record_delivery(self, p, slot: int) -> int | None:
        if p.delivered is not None:
            raise DoubleDelivery(f"packet {p.id} delivered twice")
        p.delivered = slot
        if p.created < self.warmup:
            return None
        lat = slot - p.created
        key = (p.ue, int(p.direction))
        self.delivered_bits[p.ue][p.direction] += p.size
        self.latency[key].append(lat)
        self.queue_free[key].append(1 if p.queue_free else 0)
        self.hops[key].append(p.hops)
        return lat

    def record_sinr(self, cls: int, direction: int, cell_kind: int, mt_tx: int, sinr_db: float,
                    snr_db: float) -> None:
        self.s_class.append(cls)
        self.s_dir.append(direction)
        self.s_cell.append(cell_kind)
        self.s_mt_tx.append(mt_tx)
        self.s_sinr.append(sinr_db)
        self.s_snr.append(snr_db)

    def record_mcs(self, link_class: str, direction: int, mcs: int, error: bool) -> None:
        self.mcs[(link_class, direction)][mcs][1 if error else 0] += 1
        self.transmissions += 1

    # views -------------------------------------------------------------------
    def throughput_bps(self, ue: int, direction: int) -> float:
        return self.delivered_bits[ue][direction] / (self.measured_slots * self.slot_s)

    def latencies(self, cls: str, direction: int) -> np.ndarray:
        parts = [np.frombuffer(self.latency[(u, direction)], dtype=np.int32)
                 for u, c in self.ue_class.items() if c == cls]
        return np.concatenate(parts) if parts else np.zeros(0, dtype=np.int32)

    def latency_table(self, cls: str, direction: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(latency, queue_free, hops) arrays over all UEs of a class."""
        us = [u for u, c in self.ue_class.items() if c == cls]
        cat = lambda m, dt: (np.concatenate([np.frombuffer(m[(u, direction)], dtype=dt) for u in us])
                             if us else np.zeros(0, dtype=dt))
        return cat(self.latency, np.int32), cat(self.queue_free, np.int8), cat(self.hops, np.int8)

    def sinr_samples(self) -> dict[str, np.ndarray]:
        return {
            "class": np.frombuffer(self.s_class, dtype=np.int8),
            "dir": np.frombuffer(self.s_dir, dtype=np.int8),
            "cell": np.frombuffer(self.s_cell, dtype=np.int8),
            "mt_tx": np.frombuffer(self.s_mt_tx, dtype=np.int8),
            "sinr": np.frombuffer(self.s_sinr, dtype=np.float32),
            "snr": np.frombuffer(self.s_snr, dtype=np.float32),
        }

    def profile_hist(self, metric: str) -> Counter:
        out = Counter()
        for (donor, m, value), n in self.profile.items():
            if m == metric:
                out[value] += n
        return out


# export ----------------------------------------------------------------------

def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _fmt(x: float) -> str:
    return repr(float(x))


def cdf_rows(group: str, values) -> list[tuple]:
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        return []
    uniq, counts = np.unique(values, return_counts=True)
    cum = np.cumsum(counts) / counts.sum()
    return [(group, _fmt(v), int(n), _fmt(c)) for v, n, c in zip(uniq, counts, cum)]


CDF_HEADER = ("group", "value", "n", "cumulative_fraction")


def export(store: MetricStore, out_dir: str | Path, manifest: dict, ue_kind: dict[int, str]) -> list[Path]:
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IOError(f"cannot create {out}: {exc}") from exc
    written = []

    rows = []
    for u in sorted(store.ue_class):
        for d, name in enumerate(DIRS):
            lat = np.frombuffer(store.latency[(u, d)], dtype=np.int32) * store.slot_s * 1e3
            p50 = _fmt(np.percentile(lat, 50)) if lat.size else ""
            p95 = _fmt(np.percentile(lat, 95)) if lat.size else ""
            rows.append((u, ue_kind[u], name, _fmt(store.throughput_bps(u, d)), p50, p95, lat.size))
    p = out / "ue_summary.csv"
    _write_csv(p, ("ue", "kind", "direction", "throughput_bps", "latency_p50_ms", "latency_p95_ms", "packets"), rows)
    written.append(p)

    for d, name in enumerate(DIRS):
        rows = []
        for cls in UE_CLASSES:
            vals = [store.throughput_bps(u, d) for u, c in store.ue_class.items() if c == cls]
            rows += cdf_rows(cls, vals)
        p = out / f"cdf_throughput_{name}.csv"
        _write_csv(p, CDF_HEADER, rows)
        written.append(p)
        rows = []
        for cls in UE_CLASSES:
            rows += cdf_rows(cls, store.latencies(cls, d) * store.slot_s * 1e3)
        p = out / f"cdf_latency_{name}.csv"
        _write_csv(p, CDF_HEADER, rows)
        written.append(p)

    s = store.sinr_samples()
    for ci, cls in enumerate(SINR_CLASSES):
        rows = []
        for d, name in enumerate(DIRS):
            m = (s["class"] == ci) & (s["dir"] == d)
            rows += cdf_rows(f"sinr_{name}", np.round(s["sinr"][m].astype(float), 1))
            rows += cdf_rows(f"snr_{name}", np.round(s["snr"][m].astype(float), 1))
        p = out / f"cdf_sinr_snr_{cls}.csv"
        _write_csv(p, CDF_HEADER, rows)
        written.append(p)

    for (lc, d), h in sorted(store.mcs.items()):
        p = out / f"mcs_hist_{lc}_{DIRS[d]}.csv"
        _write_csv(p, ("mcs", "success", "error"), [(i, h[i][0], h[i][1]) for i in range(1, len(h))])
        written.append(p)

    rows = sorted((donor, metric, value, n) for (donor, metric, value), n in store.profile.items())
    p = out / "donor_profile.csv"
    _write_csv(p, ("donor", "metric", "value", "slots"), rows)
    written.append(p)

    p = out / "manifest.json"
    p.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    written.append(p)
    return written


# merge -----------------------------------------------------------------------

_SEED_KEYS = ("seed",)


def _comparable(manifest: dict) -> dict:
    cfg = dict(manifest.get("config", {}))
    for k in _SEED_KEYS:
        cfg.pop(k, None)
    return cfg


def _read_rows(path: Path) -> list[dict]:
    with open(path, newline="") as f:
        return list(csv.DictReader(f))


def merge(dirs, out_dir) -> list[Path]:
    """Pool CDF, MCS histogram and donor-profile files of compatible runs."""
    dirs = [Path(d) for d in dirs]
    if not dirs:
        raise IncompatibleRuns("nothing to merge")
    manifests = [json.loads((d / "manifest.json").read_text()) for d in dirs]
    ref = _comparable(manifests[0])
    for d, m in zip(dirs, manifests):
        if _comparable(m) != ref:
            diff = sorted(k for k in set(ref) | set(_comparable(m)) if ref.get(k) != _comparable(m).get(k))
            raise IncompatibleRuns(f"{d} differs in {', '.join(diff)}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    names = sorted(p.name for p in dirs[0].glob("cdf_*.csv"))
    for name in names:
        counts: dict[str, Counter] = defaultdict(Counter)
        order: list[str] = []
        for d in dirs:
            for r in _read_rows(d / name):
                g = r["group"]
                if g not in counts:
                    order.append(g)
                counts[g][float(r["value"])] += int(r["n"])
        rows = []
        for g in order:
            vals = sorted(counts[g])
            n = np.array([counts[g][v] for v in vals])
            cum = np.cumsum(n) / n.sum()
            rows += [(g, _fmt(v), int(k), _fmt(c)) for v, k, c in zip(vals, n, cum)]
        _write_csv(out / name, CDF_HEADER, rows)
        written.append(out / name)
    for name in sorted(p.name for p in dirs[0].glob("mcs_hist_*.csv")):
        acc: dict[int, list[int]] = {}
        for d in dirs:
            for r in _read_rows(d / name):
                a = acc.setdefault(int(r["mcs"]), [0, 0])
                a[0] += int(r["success"])
                a[1] += int(r["error"])
        _write_csv(out / name, ("mcs", "success", "error"), [(k, *v) for k, v in sorted(acc.items())])
        written.append(out / name)
    prof = Counter()
    for d in dirs:
        for r in _read_rows(d / "donor_profile.csv"):
            prof[(int(r["donor"]), r["metric"], int(r["value"]))] += int(r["slots"])
    _write_csv(out / "donor_profile.csv", ("donor", "metric", "value", "slots"),
               sorted((a, b, c, n) for (a, b, c), n in prof.items()))
    written.append(out / "donor_profile.csv")
    merged = {"config": ref, "merged_from": [str(d) for d in dirs],
              "seeds": [m.get("config", {}).get("seed") for m in manifests]}
    (out / "manifest.json").write_text(json.dumps(merged, indent=2, sort_keys=True) + "\n")
    written.append(out / "manifest.json")
    return written
