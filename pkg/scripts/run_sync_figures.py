#!/usr/bin/env python3
"""Run the bundled synchronization sweeps (fig3..fig6) and write one CSV per
scenario, plus a per-point mean-iteration summary to stdout."""

import argparse
import os
from collections import defaultdict
from dataclasses import replace

from neurokey.harness import load_scenario, run_scenario, write_csv

SCENARIOS = ("fig3", "fig4", "fig5", "fig6")


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--trials", type=int, default=None, help="override configured trials")
    parser.add_argument("--workers", type=int, default=os.cpu_count() or 1)
    parser.add_argument("--out-dir", default="results")
    parser.add_argument("--scenarios", nargs="*", default=list(SCENARIOS))
    args = parser.parse_args()

    os.makedirs(args.out_dir, exist_ok=True)
    for name in args.scenarios:
        scenario = load_scenario(name)
        if args.trials:
            scenario = replace(scenario, trials=args.trials)
        sums = defaultdict(lambda: [0, 0])
        records = []
        for record in run_scenario(scenario, workers=args.workers):
            records.append(record)
            entry = sums[(record.start_mode, record.K, record.N)]
            entry[0] += record.iterations
            entry[1] += 1
        path = os.path.join(args.out_dir, f"{name}.csv")
        with open(path, "w", encoding="utf-8", newline="") as handle:
            write_csv(records, handle)
        print(f"\n{name} ({scenario.trials} trials/point) -> {path}")
        for (mode, k, n), (total, count) in sorted(sums.items()):
            print(f"  {mode:14s} K={k:<3d} N={n:<3d} mean_iterations={total / count:8.1f}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
