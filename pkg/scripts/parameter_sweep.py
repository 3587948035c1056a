#!/usr/bin/env python3
"""Full candidate-grid sweep of every ILU variant, with and without acceleration.

Runs shifted ILU(0), MILU(0), ILU(p) and Crout ILU over the published
candidate grids (plus plain ILU(0)) on a scaled Poisson problem and writes a
CSV report with one row per run.  A per-variant summary compares the best
baseline iteration count with the best accelerated one and checks that
acceleration never increased the objective and always kept gamma/phi <= 1.

Usage:  python scripts/parameter_sweep.py [--m 16] [--out sweep.csv]
"""
import argparse
from collections import defaultdict

from a2ilu.bench import REFERENCE_GRIDS, RunConfig, emit_report, run_sweep
from a2ilu.factor import VARIANTS
from a2ilu.problems import KINDS, ProblemSpec


def summarize(records):
    by = defaultdict(lambda: {False: [], True: []})
    for r in records:
        by[r.variant][r.accelerated].append(r)
    print(f"{'variant':<14} {'runs':>5} {'failed':>6} {'best ILU':>9} {'best A2':>8} "
          f"{'A2 better':>9} {'f never up':>10} {'gamma/phi<=1':>12}")
    for v, d in by.items():
        runs = d[False] + d[True]
        ok = [r for r in runs if r.error is None and r.convergence_class == "convergent"]
        best = {k: min((r.iterations for r in ok if r.accelerated == k), default=None)
                for k in (False, True)}
        acc = [r for r in d[True] if r.error is None]
        better = sum(r.increase_ratio is not None and r.increase_ratio < 0 for r in acc)
        mono = all(r.f_final <= r.f_initial for r in acc)
        cons = all(r.gamma / r.phi <= 1 + 1e-12 for r in acc)
        print(f"{v:<14} {len(runs):>5} {sum(r.error is not None for r in runs):>6} "
              f"{str(best[False]):>9} {str(best[True]):>8} {better:>4}/{len(acc):<4} "
              f"{str(mono):>10} {str(cons):>12}")


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--kind", choices=KINDS, default="poisson_jump")
    ap.add_argument("--m", type=int, default=16)
    ap.add_argument("--method", choices=("cg", "bicgstab"), default="cg")
    ap.add_argument("--epsilon", type=float, default=1e-9)
    ap.add_argument("--out", default="sweep.csv")
    args = ap.parse_args(argv)
    cfg = RunConfig(
        problem=ProblemSpec(args.kind, args.m),
        variants=VARIANTS,
        alphas=REFERENCE_GRIDS["alpha"],
        omegas=REFERENCE_GRIDS["omega"],
        level_ps=REFERENCE_GRIDS["level_p"],
        tols=REFERENCE_GRIDS["tol"],
        fill_ratio_ms=REFERENCE_GRIDS["fill_ratio_m"],
        method=args.method,
        epsilon=args.epsilon,
    )
    records = run_sweep(cfg)
    written = emit_report(records, args.out, config=cfg)
    summarize(records)
    print("wrote " + ", ".join(map(str, written)))


if __name__ == "__main__":
    main()
