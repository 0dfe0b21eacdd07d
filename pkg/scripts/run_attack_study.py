#!/usr/bin/env python3
"""Eavesdropper race (the fig2 setup by default): how fast the parties
coincide vs how close an attacker gets within the same budget."""

import argparse
import os
from dataclasses import replace

import numpy as np

from neurokey.harness import load_scenario, run_scenario, write_csv


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--scenario", default="fig2")
    parser.add_argument("--trials", type=int, default=None)
    parser.add_argument("--workers", type=int, default=os.cpu_count() or 1)
    parser.add_argument("--out", default="results/fig2.csv")
    args = parser.parse_args()

    scenario = load_scenario(args.scenario)
    if args.trials:
        scenario = replace(scenario, trials=args.trials)
    records = list(run_scenario(scenario, workers=args.workers))
    os.makedirs(os.path.dirname(args.out) or ".", exist_ok=True)
    with open(args.out, "w", encoding="utf-8", newline="") as handle:
        write_csv(records, handle)

    ab_iters = np.array([r.iterations for r in records if r.converged])
    overlaps = np.array([r.attacker_best_overlap for r in records])
    synced = int((overlaps >= 1.0).sum())
    print(f"scenario {scenario.name}: {len(records)} trials -> {args.out}")
    print(f"parties converged: {len(ab_iters)}/{len(records)}; "
          f"median {int(np.median(ab_iters))}, p90 {int(np.percentile(ab_iters, 90))} iterations")
    print(f"attacker synced within budget: {synced} ({synced / len(records):.1%}); "
          f"mean best overlap {overlaps.mean():.3f}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
