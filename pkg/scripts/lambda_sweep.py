#!/usr/bin/env python3
"""Sweep the first-stage frequency and tabulate stress ratios and error pieces."""

import argparse
import csv
import sys

from activeci.directions import build_basis
from activeci.iteration import base_state, make_params, oscillation_diagnostics, step
from activeci.kernels import ShellKernel
from activeci.multipliers import ipm2d
from activeci.slabs import build_profile


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument(
        "--lams",
        type=int,
        nargs="+",
        default=[64, 256, 1024, 4096],
        help="first-stage frequencies (powers of two)",
    )
    parser.add_argument("--grid-budget", type=int, default=8192)
    parser.add_argument("--out", default="sweep.csv", help="output CSV path")
    args = parser.parse_args()

    m = ipm2d()
    basis = build_basis(m, supplied=((4, 3), (4, -3)))
    kernel = ShellKernel()
    profile = build_profile("odd-bump")

    rows = []
    for lam in args.lams:
        params = make_params(
            basis, lambda1=lam, qmax=1, grid_budget=args.grid_budget
        )
        st0 = base_state(params, m, basis)
        st1, bundle = step(st0, params, basis, m, kernel, profile)
        diag = oscillation_diagnostics(bundle, st0, params, basis, m)
        h = st1.norm_history[-1]
        rows.append(
            {
                "lam": lam,
                "eps": params.stage_eps(1),
                "degenerate": bundle.degenerate,
                "ratio": h["ratio"],
                "R_Hs": h["R_Hs"],
                "R_N_Hs": h["R_N_Hs"],
                "R_D_Hs": h["R_D_Hs"],
                "cancellation_ratio": diag["ratio"],
                "mean_cancellation_rel": diag["mean_cancellation_rel"],
            }
        )
        print(
            f"lam={lam}: eps={params.stage_eps(1):.4g} ratio={h['ratio']:.4g} "
            f"degenerate={bundle.degenerate}"
        )

    with open(args.out, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
        writer.writeheader()
        writer.writerows(rows)
    print(f"wrote {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
