#!/usr/bin/env python3
"""Reproduce the error-correction comparison: BBBSS vs Cascade on identical
noisy key pairs, and mutual learning at matching initial agreement.

Writes one aligned table per setting to stdout and, with --out-dir, a CSV
per setting.
"""

import argparse
import os

from neurokey.harness import compare_algorithms, comparison_csv, format_comparison_table
from neurokey.tpm import TpmParams

SETTINGS = (
    # key_length, qber, machine width for the mutual-learning column
    (500, 0.05, 25),
    (600, 0.03, 30),
)


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--trials", type=int, default=1000)
    parser.add_argument("--seed", type=int, default=1010)
    parser.add_argument("--workers", type=int, default=os.cpu_count() or 1)
    parser.add_argument("--out-dir", default=None)
    args = parser.parse_args()

    for key_length, qber, tpm_n in SETTINGS:
        rows = compare_algorithms(
            key_length,
            qber,
            trials=args.trials,
            seed=args.seed,
            tpm_params=TpmParams(K=10, N=tpm_n, L=2),
            workers=args.workers,
        )
        print(f"\nkey {key_length} bits, error rate {qber:.0%}:")
        print(format_comparison_table(rows))
        if args.out_dir:
            os.makedirs(args.out_dir, exist_ok=True)
            path = os.path.join(args.out_dir, f"table1_{key_length}b.csv")
            with open(path, "w", encoding="utf-8", newline="") as handle:
                handle.write(comparison_csv(rows))
            print(f"wrote {path}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
