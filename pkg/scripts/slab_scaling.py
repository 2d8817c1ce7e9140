#!/usr/bin/env python3
"""Measure slab L^p norms across scales and fit slopes against the targets."""

import argparse
import math
import sys

from activeci.slabs import build_profile, certify_scaling, write_scaling_csv


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument(
        "--lams", type=int, nargs="+", default=[64, 256, 1024, 4096]
    )
    parser.add_argument("--eps", type=float, default=0.5)
    parser.add_argument(
        "--k", type=int, nargs=2, default=[4, 3], help="slab direction"
    )
    parser.add_argument("--out", default="scaling.csv")
    args = parser.parse_args()

    profile = build_profile("odd-bump")
    rows = certify_scaling(
        tuple(args.k), profile, args.lams, args.eps, [1.0, 2.0, math.inf]
    )
    seen = set()
    for row in rows:
        key = row["p"]
        if key not in seen:
            seen.add(key)
            print(
                f"p={key}: fitted slope {row['fitted_slope']:+.4f}, "
                f"target {row['target_slope']:+.4f}, "
                f"deviation {row['deviation']:+.2e}"
            )
    write_scaling_csv(rows, args.out)
    print(f"wrote {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
