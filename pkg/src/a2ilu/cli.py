"""Command-line interface: ``a2ilu {generate,solve,sweep,collection}``.

Exit status is 0 whenever the command ran to completion -- a solve that does
not converge is a result, not an error.  Bad configuration exits with 2 and
unexpected internal errors with 1.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import bench
from .errors import ConfigError, MatrixMarketError, ResourceLimitError, ZeroDiagonalError
from .factor import VARIANTS
from .problems import KINDS, ProblemSpec, generate
from .sparse import write_matrix_market

log = logging.getLogger("a2ilu")

EXIT_OK, EXIT_INTERNAL, EXIT_CONFIG = 0, 1, 2


def _floats(text):
    try:
        return tuple(bench._num(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _ints(text):
    try:
        return tuple(int(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _add_problem_args(p):
    g = p.add_argument_group("generated problem")
    g.add_argument("--kind", choices=KINDS, help="generator (default poisson_jump)")
    g.add_argument("--m", type=int, help="grid points per axis (n = m^3)")
    g.add_argument("--contrast", type=float, default=1e3, help="kappa jump (poisson_jump)")
    g.add_argument("--shift", type=float, default=0.0, help="Helmholtz shift")
    g.add_argument("--velocity", type=_floats, default=(1.0, 1.0, 1.0),
                   help="advection velocity vx,vy,vz")


def _add_solver_args(p, epsilon=None):
    g = p.add_argument_group("solver")
    g.add_argument("--method", choices=("cg", "bicgstab"))
    g.add_argument("--epsilon", type=float, default=epsilon,
                   help="stop when ||r||^2/||b||^2 <= epsilon")
    g.add_argument("--max-iters", type=int, help="iteration cap (default 10*m or n)")
    g.add_argument("--no-scaling", action="store_true", help="skip diagonal scaling")
    g.add_argument("--no-constraint", action="store_true",
                   help="do not project gamma/phi > 1 onto gamma = phi")


def build_parser():
    ap = argparse.ArgumentParser(prog="a2ilu", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a generated matrix (and rhs) to Matrix Market")
    _add_problem_args(g)
    g.add_argument("-o", "--output", required=True, help=".mtx path")
    g.add_argument("--rhs", help="also write the right-hand side (one value per line)")

    s = sub.add_parser("solve", help="one factorization + solve, with and/or without acceleration")
    src = s.add_mutually_exclusive_group()
    src.add_argument("--matrix", help="Matrix Market file (b = A e)")
    _add_problem_args(s)
    s.add_argument("--variant", choices=VARIANTS, default="ilu0")
    s.add_argument("--alpha", type=float, default=0.0)
    s.add_argument("--omega", type=float, default=0.0)
    s.add_argument("--p", type=int, default=0, dest="level_p")
    s.add_argument("--tol", type=float, default=0.0)
    s.add_argument("--fill-ratio", type=bench._num, default=math.inf, dest="fill_ratio_m")
    s.add_argument("--acceleration", choices=("on", "off", "both"), default="both")
    _add_solver_args(s)
    s.add_argument("-o", "--output", help="report path (.csv or .json)")

    w = sub.add_parser("sweep", help="variant x parameter-grid x acceleration sweep")
    w.add_argument("--config", help="JSON or TOML file with RunConfig fields")
    w.add_argument("--matrix", help="Matrix Market file (b = A e)")
    _add_problem_args(w)
    w.add_argument("--variants", help="comma-separated subset of " + ",".join(VARIANTS))
    w.add_argument("--alphas", type=_floats)
    w.add_argument("--omegas", type=_floats)
    w.add_argument("--ps", type=_ints, dest="level_ps")
    w.add_argument("--tols", type=_floats)
    w.add_argument("--fill-ratios", type=_floats, dest="fill_ratio_ms")
    w.add_argument("--reference-grids", action="store_true",
                   help="use the published candidate grids for every unset grid")
    w.add_argument("--acceleration", choices=("on", "off", "both"))
    _add_solver_args(w)
    w.add_argument("--threads", type=int, help=f"worker threads (default ${bench.THREADS_ENV} or 1)")
    w.add_argument("-o", "--output", required=True, help="report path (.csv or .json)")

    c = sub.add_parser("collection", help="shifted ILU(0) vs shifted A2ILU(0) over a directory")
    c.add_argument("directory")
    c.add_argument("--config", help="JSON or TOML file with CollectionConfig fields")
    c.add_argument("--alphas", type=_floats)
    _add_solver_args(c)
    c.add_argument("--threads", type=int)
    c.add_argument("-o", "--output", required=True, help="JSON report path (records also as CSV)")
    return ap


def _problem(args, required=True):
    if args.m is None:
        if args.kind is not None or required:
            raise ConfigError("--m is required for a generated problem")
        return None
    try:
        return ProblemSpec(kind=args.kind or "poisson_jump", m=args.m, contrast=args.contrast,
                           shift=args.shift, velocity=tuple(args.velocity))
    except ValueError as e:
        raise ConfigError(str(e)) from None


def _solver_overrides(args):
    out = {}
    if args.method is not None:
        out["method"] = args.method
    if args.epsilon is not None:
        out["epsilon"] = args.epsilon
    if args.max_iters is not None:
        out["max_iters"] = args.max_iters
    if args.no_scaling:
        out["scaling"] = False
    if args.no_constraint:
        out["constrain"] = False
    return out


def cmd_generate(args):
    spec = _problem(args)
    A, b = generate(spec)
    write_matrix_market(args.output, A, symmetric=bool(A.symmetric), comment=spec.label())
    if args.rhs:
        np.savetxt(args.rhs, b, fmt="%.17g")
    print(f"wrote {args.output}: n={A.n} nnz={A.nnz} symmetric={A.symmetric}")
    return EXIT_OK


def _print_records(records):
    for r in records:
        tag = "A2" if r.accelerated else "  "
        params = ",".join(
            f"{k}={v:g}" for k, v in (("alpha", r.alpha), ("omega", r.omega), ("p", r.level_p),
                                      ("tol", r.tol), ("m", r.fill_ratio_m)) if v is not None
        )
        head = f"{tag} {r.variant}({params})" if params else f"{tag} {r.variant}"
        if r.error:
            print(f"{head}: failed ({r.error})")
            continue
        extra = f" phi={r.phi:.4f} gamma={r.gamma:.4f}" if r.accelerated else ""
        inc = f" increase={r.increase_ratio:+.3f}" if r.increase_ratio is not None else ""
        print(f"{head}: {r.iterations} its, {r.convergence_class}, "
              f"f={r.f_final:.4g}{extra}{inc}")


def cmd_solve(args):
    d = {
        "variants": (args.variant,),
        "alphas": (args.alpha,),
        "omegas": (args.omega,),
        "level_ps": (args.level_p,),
        "tols": (args.tol,),
        "fill_ratio_ms": (args.fill_ratio_m,),
        "acceleration": args.acceleration,
    }
    if args.matrix:
        d["matrix"] = args.matrix
    else:
        d["problem"] = _problem(args)
    d.update(_solver_overrides(args))
    cfg = bench.RunConfig.from_dict(d)
    records = bench.run_sweep(cfg)
    _print_records(records)
    if args.output:
        bench.emit_report(records, args.output, config=cfg)
    return EXIT_OK


def cmd_sweep(args):
    d = bench.load_config(args.config) if args.config else {}
    if args.matrix:
        d.pop("problem", None)
        d["matrix"] = args.matrix
    else:
        spec = _problem(args, required=False)
        if spec is not None:
            d.pop("matrix", None)
            d["problem"] = asdict(spec)
    if args.variants:
        d["variants"] = tuple(v.strip() for v in args.variants.split(","))
    for k in ("alphas", "omegas", "level_ps", "tols", "fill_ratio_ms", "acceleration", "threads"):
        if getattr(args, k) is not None:
            d[k] = getattr(args, k)
    if args.reference_grids:
        d["reference_grids"] = True
    d.update(_solver_overrides(args))
    if "problem" not in d and "matrix" not in d:
        raise ConfigError("a sweep needs --matrix, --m, or a config file with a source")
    cfg = bench.RunConfig.from_dict(d)
    records = bench.run_sweep(cfg)
    written = bench.emit_report(records, args.output, config=cfg)
    failed = sum(r.error is not None for r in records)
    print(f"{len(records)} runs ({failed} failed) -> {', '.join(map(str, written))}")
    return EXIT_OK


def cmd_collection(args):
    d = bench.load_config(args.config) if args.config else {}
    if args.alphas is not None:
        d["alphas"] = args.alphas
    for k, v in _solver_overrides(args).items():
        d[k] = v
    if args.threads is not None:
        d["threads"] = args.threads
    cfg = bench.CollectionConfig.from_dict(d)
    report = bench.run_collection(args.directory, cfg)
    written = bench.emit_collection_report(report, Path(args.output))
    print(f"{len(report.matrices)} matrices, {len(report.skipped)} skipped")
    ilu, acc = report.tally(False), report.tally(True)
    print("alpha   ILU conv/pseudo/not    A2ILU conv/pseudo/not")
    for a in report.alphas:
        x, y = ilu[a], acc[a]
        print(f"{a:5.2f}   {x['convergent']:4d} {x['pseudo_convergent']:4d} {x['not_convergent']:4d}"
              f"        {y['convergent']:4d} {y['pseudo_convergent']:4d} {y['not_convergent']:4d}")
    for name, why in report.skipped:
        print(f"skipped {name}: {why}")
    print("wrote " + ", ".join(map(str, written)))
    return EXIT_OK


COMMANDS = {
    "generate": cmd_generate,
    "solve": cmd_solve,
    "sweep": cmd_sweep,
    "collection": cmd_collection,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, ZeroDiagonalError, MatrixMarketError, ResourceLimitError,
            FileNotFoundError, json.JSONDecodeError) as e:
        print(f"a2ilu: error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception:
        log.exception("internal error")
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
