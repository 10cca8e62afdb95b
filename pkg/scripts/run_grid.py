"""Run the 3 x 3 x 3 scenario grid with replications, then pool each cell's seeds.

Example:
    python3 scripts/run_grid.py --slots 40000 --reps 3 --out results
"""

import argparse
import sys
from pathlib import Path

from miabsim.cli import main as cli_main
from miabsim.metrics import merge


def parse_args(argv=None):
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--slots", type=int, default=40_000)
    p.add_argument("--reps", type=int, default=3)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--jobs", type=int, default=None)
    p.add_argument("--out", default="results")
    return p.parse_args(argv)


def main(argv=None) -> int:
    args = parse_args(argv)
    sweep = ["sweep", "--grid", "paper", "--slots", str(args.slots), "--reps", str(args.reps),
             "--seed", str(args.seed), "--out", args.out]
    if args.jobs is not None:
        sweep += ["--jobs", str(args.jobs)]
    rc = cli_main(sweep)
    if args.reps > 1:
        for cell in sorted(p for p in Path(args.out).iterdir() if p.is_dir()):
            seeds = sorted(cell.glob("seed_*"))
            if seeds:
                merge(seeds, cell / "pooled")
                print(cell / "pooled")
    return rc


if __name__ == "__main__":
    sys.exit(main())
