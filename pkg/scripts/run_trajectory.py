#!/usr/bin/env python3
"""Run the 50-query trace study from a config file and print the
per-method distance-range histograms.

Usage: python3 scripts/run_trajectory.py [config.ini]
"""

import sys
from pathlib import Path

from graphknn import ExperimentConfig, run_trajectory_study


def main() -> int:
    here = Path(__file__).resolve().parent
    cfg_path = Path(sys.argv[1]) if len(sys.argv) > 1 else here / "experiment.ini"
    cfg = ExperimentConfig.from_file(cfg_path)
    hists, _ = run_trajectory_study(cfg)
    for algo, hist in hists.items():
        print(f"\n{algo} ({hist.total} evaluations over "
              f"{hist.query_count} queries, far to near):")
        peak = max(int(c) for c in hist.counts) or 1
        for i, c in enumerate(hist.counts):
            lo, hi = hist.edges[i + 1], hist.edges[i]
            bar = "#" * round(40 * int(c) / peak)
            print(f"  ({lo:8.4f}, {hi:8.4f}] {int(c):8d} {bar}")
    print(f"\nCSV files written to {cfg.output_dir}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
