#!/usr/bin/env python3
"""Run the corrupted-data experiment regimes.

Generates two 171-entity bundles whose duplicates carry random character
edits (20% and 40% of duplicates corrupted) and runs the epsilon=3 grid on
each, mirroring the robustness study on dirty data.
"""

import argparse
import sys
from pathlib import Path

from ppcard.cli import main as cli_main


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out-dir", default="results/corrupted", help="output directory")
    ap.add_argument("--seed", type=int, default=20, help="master seed")
    ap.add_argument("--entities", type=int, default=171)
    ap.add_argument("--epsilons", default="3")
    ap.add_argument("--p-flip-step", type=float, default=0.005)
    args = ap.parse_args()

    out = Path(args.out_dir)
    for frac, name in ((0.2, "corrupt20"), (0.4, "corrupt40")):
        bundle = out / name / "bundle"
        rc = cli_main([
            "datagen", "--entities", str(args.entities), "--duplicates", "1",
            "--providers", "2", "--corruption", str(frac),
            "--seed", str(args.seed), "--out-dir", str(bundle),
        ])
        if rc:
            return rc
        rc = cli_main([
            "grid", "--bundle-dir", str(bundle), "--epsilons", args.epsilons,
            "--p-flip-start", "0.10", "--p-flip-stop", "0.30",
            "--p-flip-step", str(args.p_flip_step),
            "--k-min", "120", "--k-max", "230",
            "--seed", str(args.seed), "--out-dir", str(out / name),
        ])
        if rc:
            return rc
    return 0


if __name__ == "__main__":
    sys.exit(main())
