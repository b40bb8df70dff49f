#!/usr/bin/env python3
"""Run the clean-data experiment matrix.

Generates a 171-entity bundle (1 duplicate per entity, 2 providers, no
corruption), then runs the full (method, epsilon, p_flip) grid with the
restricted k range and writes grid.csv / grid_manifest.json plus the
per-provider exchange files.
"""

import argparse
import sys
from pathlib import Path

from ppcard.cli import main as cli_main


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out-dir", default="results/clean", help="output directory")
    ap.add_argument("--seed", type=int, default=20, help="master seed")
    ap.add_argument("--entities", type=int, default=171)
    ap.add_argument("--epsilons", default="1,2,3,4,5,10")
    ap.add_argument("--p-flip-step", type=float, default=0.005)
    ap.add_argument("--silhouette", action="store_true", help="also run the silhouette baseline")
    args = ap.parse_args()

    out = Path(args.out_dir)
    bundle = out / "bundle"
    rc = cli_main([
        "datagen", "--entities", str(args.entities), "--duplicates", "1",
        "--providers", "2", "--corruption", "0", "--seed", str(args.seed),
        "--out-dir", str(bundle),
    ])
    if rc:
        return rc
    cmd = [
        "grid", "--bundle-dir", str(bundle), "--epsilons", args.epsilons,
        "--p-flip-start", "0.10", "--p-flip-stop", "0.30",
        "--p-flip-step", str(args.p_flip_step),
        "--k-min", "120", "--k-max", "230",
        "--seed", str(args.seed), "--out-dir", str(out),
    ]
    if args.silhouette:
        cmd.append("--silhouette")
    return cli_main(cmd)


if __name__ == "__main__":
    sys.exit(main())
