#!/usr/bin/env python3
"""Emit closed-form same-cluster probability curves.

Writes a CSV of P(perturbed record stays within distance r of its original)
as a function of privacy budget and distance threshold, with an optional
Monte-Carlo cross-check column.
"""

import argparse
import sys

from ppcard.cli import main as cli_main


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="results/theory_curves.csv")
    ap.add_argument("--epsilons", default="1,2,3,4,5,10")
    ap.add_argument("--ell", type=int, default=200)
    ap.add_argument("--mc-trials", type=int, default=10_000)
    args = ap.parse_args()
    return cli_main([
        "theory-curves", "--epsilons", args.epsilons, "--ell", str(args.ell),
        "--mc-trials", str(args.mc_trials), "--out", args.out,
    ])


if __name__ == "__main__":
    sys.exit(main())
