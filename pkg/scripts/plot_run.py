#!/usr/bin/env python3
"""Quick-look figures from a run directory (requires matplotlib).

Usage:
    python scripts/plot_run.py <run_dir> [--out figures.png]

Reads plotdata.csv (generated on demand) and draws one panel per quantity on
log-log axes where the values are positive.
"""

import argparse
import csv
import sys
from collections import defaultdict
from pathlib import Path


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("run_dir")
    parser.add_argument("--out", default=None)
    args = parser.parse_args()

    try:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        print("matplotlib is not installed; `pip install matplotlib`", file=sys.stderr)
        return 1

    run_dir = Path(args.run_dir)
    plotdata = run_dir / "plotdata.csv"
    if not plotdata.exists():
        from logflow.cli import emit_plotdata
        emit_plotdata(run_dir)

    series = defaultdict(list)
    with open(plotdata, newline="") as f:
        for row in csv.DictReader(f):
            series[row["quantity"]].append((float(row["t"]), float(row["value"])))

    series = {k: sorted(v) for k, v in series.items() if len(v) > 1}
    if not series:
        print("nothing to plot", file=sys.stderr)
        return 1

    fig, axes = plt.subplots(1, len(series), figsize=(4.2 * len(series), 3.4))
    if len(series) == 1:
        axes = [axes]
    for ax, (name, pts) in zip(axes, sorted(series.items())):
        ts = [p[0] for p in pts]
        vs = [p[1] for p in pts]
        ax.plot(ts, vs, "o-")
        ax.set_title(name)
        ax.set_xlabel("t")
        if all(v > 0 for v in vs) and all(t > 0 for t in ts):
            ax.set_xscale("log")
            ax.set_yscale("log")
        ax.grid(True, alpha=0.4)
    fig.tight_layout()
    out = args.out or str(run_dir / "figures.png")
    fig.savefig(out, dpi=130)
    print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
