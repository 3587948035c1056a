#!/usr/bin/env python3
"""Scalability of A²ILU(0) on the jump-coefficient Poisson problem.

For each grid size m the scaled m^3 problem is solved by CG with ILU(0) and
with A²ILU(0); prints iteration counts, optimized (phi, gamma), speed-up
ratios and the objective before/after acceleration.  The objective is
reported both as f = ||Re||^2 and as ||Re||.

The stopping rule is ||r||^2/||b||^2 <= epsilon.  Run with --epsilon 1e-18
to stop at ||r||/||b|| <= 1e-9 instead.

Usage:  python scripts/scalability.py [--sizes 10,20,40,80] [--epsilon 1e-9] [--csv out.csv]
"""
import argparse
import csv
import math

from a2ilu.bench import scalability_row


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", default="10,20,40,80")
    ap.add_argument("--epsilon", type=float, default=1e-9)
    ap.add_argument("--csv", help="write the rows to this CSV file")
    args = ap.parse_args(argv)
    sizes = [int(x) for x in args.sizes.split(",")]

    scalability_row(4, args.epsilon)  # compile / load the numba kernels once
    rows = []
    print(f"epsilon = {args.epsilon:g} on ||r||^2/||b||^2")
    print(f"{'n':>6} {'ILU its':>8} {'A2 its':>7} {'phi':>6} {'gamma':>6} "
          f"{'its x':>6} {'time x':>7} {'||Re|| ILU':>11} {'||Re|| A2':>10} "
          f"{'norm ratio':>10} {'f ratio':>8} {'accel %':>8}")
    for m in sizes:
        r = scalability_row(m, args.epsilon)
        rows.append(r)
        print(f"{m:>4}^3 {r['ilu_iterations']:>8} {r['a2_iterations']:>7} {r['phi']:>6.2f} "
              f"{r['gamma']:>6.2f} {r['speedup_iterations']:>6.2f} {r['speedup_time']:>7.2f} "
              f"{math.sqrt(r['f_ilu']):>11.3e} {math.sqrt(r['f_a2']):>10.3e} "
              f"{r['norm_ratio']:>10.3f} {r['f_ratio']:>8.4f} {100 * r['accel_fraction']:>7.2f}%")
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
            w.writeheader()
            w.writerows(rows)


if __name__ == "__main__":
    main()
