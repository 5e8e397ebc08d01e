#!/usr/bin/env python3
"""Run the ef sweep described by a config file and render the plots.

Usage: python3 scripts/run_sweep.py [config.ini]
Defaults to the experiment.ini next to this script.
"""

import subprocess
import sys
from pathlib import Path

from graphknn import ExperimentConfig, run_sweep


def main() -> int:
    here = Path(__file__).resolve().parent
    cfg_path = Path(sys.argv[1]) if len(sys.argv) > 1 else here / "experiment.ini"
    cfg = ExperimentConfig.from_file(cfg_path)
    records, failures = run_sweep(cfg)
    for rec in records:
        print(f"{rec.algo:>10} ef={rec.ef:<4} recall@1={rec.recall_at_1:.4f} "
              f"mean_evals={rec.mean_evals:9.1f} "
              f"eval_speedup={rec.eval_speedup:8.2f}")
    for algo, err in failures:
        print(f"FAILED {algo}: {err}", file=sys.stderr)
    plot = Path(cfg.output_dir) / "plot_results.py"
    try:
        subprocess.run([sys.executable, str(plot)], check=True)
    except Exception as exc:  # matplotlib may be absent
        print(f"plotting skipped: {exc}", file=sys.stderr)
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
