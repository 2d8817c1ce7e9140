#!/usr/bin/env python3
"""Run the shipped default two-stage construction and print a short summary."""

import argparse
import json
import os
import sys

from activeci.harness import RunConfig, run


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="out", help="output directory")
    parser.add_argument("--qmax", type=int, default=2, help="number of stages")
    parser.add_argument("--lambda1", type=int, default=256, help="first stage frequency")
    parser.add_argument("--seed", type=int, default=0, help="test-function seed")
    args = parser.parse_args()

    rc = run(
        RunConfig(out=args.out, qmax=args.qmax, lambda1=args.lambda1, seed=args.seed)
    )
    with open(os.path.join(args.out, "report.json")) as fh:
        report = json.load(fh)
    print(f"exact structural checks passed: {report['exact_pass']}")
    for stage in report["stages"]:
        h = stage["history"]
        ratio = h.get("ratio")
        print(
            f"  stage {stage['q']}: ||R||_H^-s = {h['R_Hs']:.6g}"
            + (f", ratio = {ratio:.4g}" if ratio else "")
        )
    print(f"artifacts in {args.out}/")
    return rc


if __name__ == "__main__":
    sys.exit(main())
