import csv
import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from miabsim.config import ScenarioConfig, ScenarioKind
from miabsim.metrics import DoubleDelivery, IncompatibleRuns, MetricStore, cdf_rows, export, merge
from miabsim.sim import run_simulation
from miabsim.traffic import Direction, Packet


def rows(path):
    with open(path, newline="") as f:
        return list(csv.DictReader(f))


def test_empty_store_exports_headers(tmp_path):
    store = MetricStore({}, 0, 10, 0.25e-3)
    files = export(store, tmp_path, {"config": {}}, {})
    names = {f.name for f in files}
    assert {"manifest.json", "ue_summary.csv", "cdf_throughput_dl.csv", "cdf_latency_ul.csv",
            "cdf_sinr_snr_passenger.csv", "donor_profile.csv", "mcs_hist_backhaul_dl.csv"} <= names
    assert (tmp_path / "cdf_throughput_dl.csv").read_text() == "group,value,n,cumulative_fraction\n"
    assert b"\r" not in (tmp_path / "ue_summary.csv").read_bytes()


@given(vals=st.lists(st.floats(-1e6, 1e6, allow_nan=False), min_size=1, max_size=200))
def test_cdf_monotone_to_one(vals):
    r = cdf_rows("g", vals)
    cum = [float(x[3]) for x in r]
    assert all(b >= a for a, b in zip(cum, cum[1:]))
    assert cum[-1] == pytest.approx(1.0)
    assert sum(x[2] for x in r) == len(vals)


def test_double_delivery_rejected():
    store = MetricStore({7: "passenger"}, 0, 10, 0.25e-3)
    p = Packet(0, 100, Direction.DL, 7, 0)
    assert store.record_delivery(p, 3) == 3
    with pytest.raises(DoubleDelivery):
        store.record_delivery(p, 4)


def test_warmup_excluded():
    store = MetricStore({7: "passenger"}, 20, 10, 0.25e-3)
    assert store.record_delivery(Packet(0, 100, Direction.DL, 7, 19), 25) is None
    assert store.delivered_bits[7] == [0, 0]


@pytest.fixture(scope="module")
def runs(tmp_path_factory):
    base = tmp_path_factory.mktemp("runs")
    out = []
    for seed in (1, 2):
        d = base / f"s{seed}"
        run_simulation(ScenarioConfig(ScenarioKind.MIAB, 0.5, 2048, seed=seed, duration_slots=300), d)
        out.append(d)
    other = base / "other"
    run_simulation(ScenarioConfig(ScenarioKind.MIAB, 0.5, 1024, seed=1, duration_slots=300), other)
    return base, out, other


def test_merge_identity(runs, tmp_path):
    _, (a, _), _ = runs
    merge([a], tmp_path)
    for f in a.glob("cdf_*.csv"):
        assert rows(tmp_path / f.name) == rows(f)
    for f in a.glob("mcs_hist_*.csv"):
        assert rows(tmp_path / f.name) == rows(f)


def test_merge_counts_add(runs, tmp_path):
    _, dirs, _ = runs
    merge(dirs, tmp_path)
    for name in ("cdf_latency_dl.csv", "cdf_sinr_snr_pedestrian.csv"):
        total = sum(int(r["n"]) for d in dirs for r in rows(d / name))
        assert sum(int(r["n"]) for r in rows(tmp_path / name)) == total
    seeds = json.loads((tmp_path / "manifest.json").read_text())["seeds"]
    assert seeds == [1, 2]


def test_merge_incompatible(runs, tmp_path):
    _, (a, _), other = runs
    with pytest.raises(IncompatibleRuns):
        merge([a, other], tmp_path)


def test_ue_summary_complete(runs):
    _, (a, _), _ = runs
    r = rows(a / "ue_summary.csv")
    assert len(r) == 72 * 2
    assert {x["kind"] for x in r} == {"pedestrian", "passenger"}
