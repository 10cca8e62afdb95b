"""Plot CDFs from run or pooled output directories (needs the ``plot`` extra).

Example:
    python3 scripts/plot_results.py results/miab_p50_b3072/pooled results/only_macros_p50_b3072/pooled \
        --out figures
"""

import argparse
import csv
from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def read_cdf(path: Path) -> dict:
    groups = defaultdict(lambda: ([], []))
    with open(path, newline="") as f:
        for r in csv.DictReader(f):
            x, y = groups[r["group"]]
            x.append(float(r["value"]))
            y.append(float(r["cumulative_fraction"]))
    return groups


def plot_file(dirs, name: str, xlabel: str, out: Path, scale: float = 1.0) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    for d in dirs:
        path = Path(d) / name
        if not path.exists():
            continue
        for group, (x, y) in read_cdf(path).items():
            ax.step([v * scale for v in x], y, where="post", label=f"{Path(d).parent.name or d} {group}")
    ax.set_xlabel(xlabel)
    ax.set_ylabel("CDF")
    ax.grid(alpha=0.3)
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(out / (Path(name).stem + ".png"), dpi=150)
    plt.close(fig)


def main(argv=None) -> None:
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("dirs", nargs="+")
    p.add_argument("--out", default="figures")
    args = p.parse_args(argv)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    plot_file(args.dirs, "cdf_throughput_dl.csv", "DL throughput [Mbps]", out, 1e-6)
    plot_file(args.dirs, "cdf_throughput_ul.csv", "UL throughput [Mbps]", out, 1e-6)
    plot_file(args.dirs, "cdf_latency_dl.csv", "DL latency [ms]", out)
    plot_file(args.dirs, "cdf_latency_ul.csv", "UL latency [ms]", out)
    for cls in ("pedestrian", "passenger", "backhaul"):
        plot_file(args.dirs, f"cdf_sinr_snr_{cls}.csv", f"{cls} SINR / SNR [dB]", out)
    print(out)


if __name__ == "__main__":
    main()
