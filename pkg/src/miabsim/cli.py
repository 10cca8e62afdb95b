"""Command-line entry point: single runs, grid sweeps, replications and merging."""

from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from .config import ParseError, ScenarioConfig, ValidationError, config_from_dict, load_config
from .metrics import IncompatibleRuns, merge

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_AUDIT = 3

EXPERIMENT_GRID = {
    "scenario_kind": ("only_macros", "macros_picos", "miab"),
    "cbr_packet_bits": (1024, 2048, 3072),
    "passenger_fraction": (0.25, 0.5, 0.75),
}


@dataclass(frozen=True)
class RunSpec:
    config: ScenarioConfig
    reps: int = 1
    seed_base: int = 0
    out: Path = Path("out")
    jobs: int = 1
    dump_links: bool = False
    dump_grants: bool = False
    dump_trajectory: bool = False

    def jobs_list(self) -> list[tuple[ScenarioConfig, Path]]:
        """One (config, output dir) per replication; seed = seed_base + i."""
        if self.reps == 1:
            return [(self.config.replace(seed=self.seed_base), self.out)]
        return [(self.config.replace(seed=self.seed_base + i), self.out / f"seed_{self.seed_base + i}")
                for i in range(self.reps)]


def _run_one(cfg: ScenarioConfig, out: Path, dump_links: bool, dump_grants: bool,
             dump_trajectory: bool) -> tuple[str, dict]:
    from .sim import run_simulation
    res = run_simulation(cfg, out, strict=False, dump_grants=dump_grants, dump_links=dump_links,
                         dump_trajectory=dump_trajectory)
    return str(out), res.audits.failures()


def execute(specs: list[RunSpec], jobs: int = 1) -> int:
    """Run every replication of every spec; returns the process exit code."""
    work = [(cfg, out, s.dump_links, s.dump_grants, s.dump_trajectory) for s in specs for cfg, out in s.jobs_list()]
    failed = []
    if jobs <= 1 or len(work) == 1:
        results = [_run_one(*w) for w in work]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(_run_one, *w) for w in work]
            results = [f.result() for f in futures]
    for out, fails in results:
        if fails:
            failed.append(out)
            print(f"audit failure in {out}: {fails}", file=sys.stderr)
        else:
            print(out)
    return EXIT_AUDIT if failed else EXIT_OK


def _overrides(args) -> dict:
    out = {}
    if args.scenario is not None:
        out["scenario_kind"] = args.scenario
    if args.passengers is not None:
        out["passenger_fraction"] = args.passengers
    if args.packet is not None:
        out["cbr_packet_bits"] = args.packet
    if args.slots is not None:
        out["duration_slots"] = args.slots
    if args.admission_policy is not None:
        out["admission_policy"] = args.admission_policy
    if args.hysteresis_db is not None:
        out["handover_hysteresis_db"] = args.hysteresis_db
    if args.mcs_table is not None:
        out["mcs_table"] = args.mcs_table
    if args.no_preemptive_bsr:
        out["preemptive_bsr"] = False
    return out


def _base_dict(args) -> dict:
    base = {}
    if args.config is not None:
        base = load_config(args.config).to_dict()
    base.update(_overrides(args))
    return base


def _spec(args, data: dict, out: Path) -> RunSpec:
    data = dict(data)
    data["seed"] = args.seed
    cfg = config_from_dict(data)
    return RunSpec(cfg, reps=args.reps, seed_base=args.seed, out=out, jobs=args.jobs,
                   dump_links=args.dump_links, dump_grants=args.dump_grants,
                   dump_trajectory=args.dump_trajectory)


def _cell_name(data: dict) -> str:
    return f"{data['scenario_kind']}_p{int(round(100 * data['passenger_fraction']))}_b{data['cbr_packet_bits']}"


def cmd_run(args) -> int:
    spec = _spec(args, _base_dict(args), Path(args.out))
    return execute([spec], args.jobs)


def cmd_sweep(args) -> int:
    base = _base_dict(args)
    specs = []
    for kind in EXPERIMENT_GRID["scenario_kind"]:
        for bits in EXPERIMENT_GRID["cbr_packet_bits"]:
            for frac in EXPERIMENT_GRID["passenger_fraction"]:
                data = {**base, "scenario_kind": kind, "cbr_packet_bits": bits, "passenger_fraction": frac}
                specs.append(_spec(args, data, Path(args.out) / _cell_name(data)))
    if args.dry_run:
        for s in specs:
            for _, out in s.jobs_list():
                print(out)
        return EXIT_OK
    return execute(specs, args.jobs)


def cmd_merge(args) -> int:
    merge(args.dirs, args.out)
    print(args.out)
    return EXIT_OK


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config file; flags override its keys")
    p.add_argument("--passengers", type=float, help="passenger fraction (0.25, 0.5 or 0.75)")
    p.add_argument("--packet", type=int, help="CBR packet size in bits")
    p.add_argument("--slots", type=int, help="simulated slots")
    p.add_argument("--seed", type=int, default=0, help="seed of the first replication")
    p.add_argument("--reps", type=int, default=1, help="replications (seeds seed..seed+reps-1)")
    p.add_argument("--out", default="out", help="output directory")
    p.add_argument("--jobs", type=int, default=os.cpu_count() or 1, help="worker processes")
    p.add_argument("--dump-links", action="store_true", help="write links.csv")
    p.add_argument("--dump-grants", action="store_true", help="write grants.csv")
    p.add_argument("--dump-trajectory", action="store_true", help="write trajectory.csv")
    p.add_argument("--admission-policy", choices=("none", "rsrp_dwell"))
    p.add_argument("--hysteresis-db", type=float)
    p.add_argument("--mcs-table", help="MCS table CSV (default: bundled table)")
    p.add_argument("--no-preemptive-bsr", action="store_true", help="wait for a BSR before UL backhaul grants")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="miab-sim", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("run", help="run one configuration")
    p.add_argument("--scenario", help="only_macros, macros_picos or miab")
    _add_common(p)
    p.set_defaults(func=cmd_run)
    p = sub.add_parser("sweep", help="run the 27-cell scenario x packet x passenger grid")
    p.add_argument("--grid", choices=("paper",), default="paper")
    p.add_argument("--dry-run", action="store_true", help="list output dirs only")
    _add_common(p)
    p.set_defaults(func=cmd_sweep, scenario=None)
    p = sub.add_parser("merge", help="pool the outputs of compatible runs")
    p.add_argument("dirs", nargs="+")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_merge)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValidationError, ParseError, IncompatibleRuns) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
