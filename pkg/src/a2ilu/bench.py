"""Benchmark harness: parameter sweeps, matrix-collection tallies, reports.

A sweep runs the Cartesian product (variant x parameter grid x
acceleration off/on) on one matrix; every cell becomes a :class:`RunRecord`.
A collection run applies shifted ILU(0) and its accelerated counterpart over
an alpha grid to every Matrix Market file of a directory and tallies the
convergence classes.

Reports are flat files.  The CSV holds the deterministic columns only, with
floats written to 17 significant digits; wall-clock timings go to a sidecar
``<stem>.timings.csv`` so identical configs give byte-identical CSVs.  The
JSON report carries everything plus ``schema_version`` and validates against
the schema files shipped in ``a2ilu/schemas``.
"""
from __future__ import annotations

import csv
import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from importlib import resources
from pathlib import Path

import numpy as np

from .accel import build_objective, make_preconditioner, objective, optimize
from .errors import (
    BreakdownError,
    ConfigError,
    MatrixMarketError,
    NumericError,
    ResourceLimitError,
    ZeroDiagonalError,
)
from .factor import VARIANTS, FactorizationConfig, factorize
from .krylov import CONVERGENT, NOT_CONVERGENT, PSEUDO_CONVERGENT, SolverConfig, solve
from .problems import ProblemSpec, generate
from .sparse import ScalingRecord, build_rhs_ones, diagonal_scale, read_matrix_market

__all__ = [
    "SCHEMA_VERSION",
    "REFERENCE_GRIDS",
    "RunConfig",
    "RunRecord",
    "CollectionConfig",
    "CollectionReport",
    "run_sweep",
    "run_collection",
    "emit_report",
    "emit_collection_report",
    "read_csv_report",
    "read_json_report",
    "validate_report",
    "load_config",
    "thread_count",
    "scalability_row",
]

SCHEMA_VERSION = "1.0"
THREADS_ENV = "A2ILU_THREADS"

# Failures that are results, not bugs: they are written into the record.
_RUN_FAILURES = (BreakdownError, NumericError, ResourceLimitError, FloatingPointError,
                 np.linalg.LinAlgError)


def _grid(start, step, count):
    return tuple(round(start + step * j, 10) for j in range(count))


REFERENCE_GRIDS = {
    "alpha": _grid(-0.4, 0.1, 11),
    "omega": _grid(-0.5, 0.1, 17),
    "level_p": (1, 2, 3),
    "fill_ratio_m": (1.0, 2.0, 5.0, 10.0),
    "tol": (0.001, 0.002, 0.004, 0.01, 0.02, 0.04, 0.1, 0.2),
}

HIST_BUCKETS = ("below_-50%", "-50%_to_0%", "no_change", "0%_to_+50%", "above_+50%")


def thread_count(default=1):
    """Worker threads from ``A2ILU_THREADS`` (>= 1)."""
    raw = os.environ.get(THREADS_ENV)
    if raw is None or raw.strip() == "":
        return default
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None
    if n < 1:
        raise ConfigError(f"{THREADS_ENV} must be >= 1")
    return n


# -- configuration --------------------------------------------------------

@dataclass(frozen=True)
class RunConfig:
    """One sweep: a matrix source, the variant grids and the solver setup.

    Exactly one of ``problem`` (a generator spec) and ``matrix`` (a Matrix
    Market path) is set.  ``max_iters=None`` means 10*m for generated
    problems and n for matrix files.
    """

    problem: ProblemSpec | None = None
    matrix: str | None = None
    variants: tuple = ("ilu0",)
    alphas: tuple = (0.0,)
    omegas: tuple = (0.0,)
    level_ps: tuple = (0,)
    tols: tuple = (0.0,)
    fill_ratio_ms: tuple = (math.inf,)
    acceleration: str = "both"
    method: str = "cg"
    epsilon: float = 1e-9
    max_iters: int | None = None
    true_residual_stride: int = 10
    scaling: bool = True
    constrain: bool = True
    threads: int | None = None

    def __post_init__(self):
        if (self.problem is None) == (self.matrix is None):
            raise ConfigError("exactly one of 'problem' and 'matrix' must be given")
        if not self.variants:
            raise ConfigError("variants must be nonempty")
        for v in self.variants:
            if v not in VARIANTS:
                raise ConfigError(f"unknown variant {v!r}; expected one of {VARIANTS}")
        for name in ("alphas", "omegas", "level_ps", "tols", "fill_ratio_ms"):
            vals = getattr(self, name)
            if len(vals) == 0:
                raise ConfigError(f"grid {name!r} is empty")
            for x in vals:
                if name == "fill_ratio_ms" and x == math.inf:
                    continue  # m = inf is the documented "no cap" setting
                if not math.isfinite(x):
                    raise ConfigError(f"grid {name!r} has a nonfinite value {x!r}")
        if self.acceleration not in ("on", "off", "both"):
            raise ConfigError("acceleration must be 'on', 'off' or 'both'")
        if self.threads is not None and self.threads < 1:
            raise ConfigError("threads must be >= 1")
        try:
            SolverConfig(self.method, self.epsilon, self.max_iters, self.true_residual_stride)
            self.factor_configs()
        except ValueError as e:
            raise ConfigError(str(e)) from None

    @property
    def flags(self):
        return {"off": (False,), "on": (True,), "both": (False, True)}[self.acceleration]

    def factor_configs(self):
        """Every (variant, parameter) cell in config order."""
        out = []
        for v in self.variants:
            if v == "ilu0":
                out.append(FactorizationConfig("ilu0"))
            elif v == "shifted_ilu0":
                out += [FactorizationConfig(v, alpha=float(a)) for a in self.alphas]
            elif v == "milu0":
                out += [FactorizationConfig(v, omega=float(w)) for w in self.omegas]
            elif v == "level_ilu":
                out += [FactorizationConfig(v, level_p=int(p)) for p in self.level_ps]
            else:
                out += [
                    FactorizationConfig(v, tol=float(t), fill_ratio_m=float(m))
                    for t in self.tols
                    for m in self.fill_ratio_ms
                ]
        return out

    def solver_config(self, n, m=None):
        cap = self.max_iters
        if cap is None:
            cap = 10 * m if m is not None else n
        return SolverConfig(self.method, self.epsilon, cap, self.true_residual_stride)

    def source_id(self):
        return self.problem.label() if self.problem is not None else Path(self.matrix).stem

    @classmethod
    def from_dict(cls, d):
        """Build from plain data (as loaded from JSON / TOML)."""
        d = dict(d)
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known - {"reference_grids"}
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        if d.pop("reference_grids", False):
            d.setdefault("alphas", REFERENCE_GRIDS["alpha"])
            d.setdefault("omegas", REFERENCE_GRIDS["omega"])
            d.setdefault("level_ps", REFERENCE_GRIDS["level_p"])
            d.setdefault("tols", REFERENCE_GRIDS["tol"])
            d.setdefault("fill_ratio_ms", REFERENCE_GRIDS["fill_ratio_m"])
        if isinstance(d.get("problem"), dict):
            p = dict(d["problem"])
            if "velocity" in p:
                p["velocity"] = tuple(p["velocity"])
            try:
                d["problem"] = ProblemSpec(**p)
            except (TypeError, ValueError) as e:
                raise ConfigError(f"bad problem spec: {e}") from None
        for k in ("variants", "alphas", "omegas", "level_ps", "tols", "fill_ratio_ms"):
            if k in d:
                v = d[k]
                d[k] = tuple(v) if isinstance(v, (list, tuple)) else (v,)
        if "fill_ratio_ms" in d:
            d["fill_ratio_ms"] = tuple(_num(x) for x in d["fill_ratio_ms"])
        return cls(**d)


def _num(x):
    if isinstance(x, str) and x.strip().lower() in ("inf", "infinity", "+inf"):
        return math.inf
    return float(x)


def load_config(path):
    """Read a JSON or TOML config file into a dict (dispatch on suffix)."""
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from None
    if path.suffix.lower() == ".toml":
        try:
            import tomllib
        except ModuleNotFoundError:  # Python < 3.11
            import tomli as tomllib

        try:
            return tomllib.loads(raw.decode())
        except tomllib.TOMLDecodeError as e:
            raise ConfigError(f"{path}: {e}") from None
    try:
        return json.loads(raw)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: {e}") from None


# -- records --------------------------------------------------------------

@dataclass
class RunRecord:
    """One (matrix, variant, parameters, acceleration) run.

    ``f_initial`` is f at (1, 1), i.e. ||(A - M_ILU) e||^2; ``f_final`` is f
    at the parameters actually used (equal to ``f_initial`` for baseline
    runs).  ``increase_ratio`` is (N_A - N_I) / N_I on accelerated records
    whose baseline exists and completed, otherwise None.
    """

    matrix_id: str
    n: int
    nnz: int
    variant: str
    alpha: float | None = None
    omega: float | None = None
    level_p: int | None = None
    tol: float | None = None
    fill_ratio_m: float | None = None
    accelerated: bool = False
    phi: float | None = None
    gamma: float | None = None
    projected: bool | None = None
    no_improvement: bool | None = None
    newton_iterations: int | None = None
    f_initial: float | None = None
    f_final: float | None = None
    iterations: int | None = None
    convergence_class: str = NOT_CONVERGENT
    final_recursive: float | None = None
    final_true: float | None = None
    true_to_recursive: float | None = None
    breakdown: str | None = None
    error: str | None = None
    increase_ratio: float | None = None
    factor_time: float | None = None
    accel_time: float | None = None
    solve_time: float | None = None

    def key(self):
        """Pairing key: everything that identifies the cell except acceleration."""
        return (self.matrix_id, self.variant, self.alpha, self.omega, self.level_p,
                self.tol, self.fill_ratio_m)

    @property
    def completed(self):
        return self.error is None and self.iterations is not None


TIMING_COLUMNS = ("factor_time", "accel_time", "solve_time")
CSV_COLUMNS = tuple(f.name for f in fields(RunRecord) if f.name not in TIMING_COLUMNS)
_KEY_COLUMNS = ("matrix_id", "variant", "alpha", "omega", "level_p", "tol", "fill_ratio_m",
                "accelerated")
_FIELD_TYPES = {
    "n": int, "nnz": int, "level_p": int, "iterations": int, "newton_iterations": int,
    "accelerated": bool, "projected": bool, "no_improvement": bool,
    "matrix_id": str, "variant": str, "convergence_class": str, "breakdown": str, "error": str,
}


def _cell(fcfg, matrix_id, A):
    r = RunRecord(matrix_id=matrix_id, n=A.n, nnz=A.nnz, variant=fcfg.variant)
    for k, v in fcfg.params().items():
        setattr(r, {"p": "level_p", "m": "fill_ratio_m"}.get(k, k), v)
    return r


def _run_cell(A, b, scaling, matrix_id, fcfg, flags, scfg, constrain):
    """Factor once, then run each acceleration flag; failures become data."""
    out = []
    t0 = time.perf_counter()
    try:
        F = factorize(A, fcfg)
    except _RUN_FAILURES as e:
        for flag in flags:
            r = _cell(fcfg, matrix_id, A)
            r.accelerated = flag
            r.error = f"{type(e).__name__}: {e}"
            r.factor_time = time.perf_counter() - t0
            out.append(r)
        return out
    t_factor = time.perf_counter() - t0

    for flag in flags:
        r = _cell(fcfg, matrix_id, A)
        r.accelerated = flag
        r.factor_time = t_factor
        try:
            t1 = time.perf_counter()
            obj = build_objective(A, F)
            if flag:
                res = optimize(obj, constrain=constrain)
                r.accel_time = time.perf_counter() - t1
                r.phi, r.gamma = res.phi, res.gamma
                r.projected, r.no_improvement = res.projected, res.no_improvement
                r.newton_iterations = res.iterations
                r.f_initial, r.f_final = res.f_initial, res.f_final
                M = make_preconditioner(F, res.params)
            else:
                r.f_initial = r.f_final = objective(obj, (1.0, 1.0))
                M = make_preconditioner(F)
            with np.errstate(all="ignore"):
                _, st = solve(A, M, b, cfg=scfg, scaling=scaling)
        except _RUN_FAILURES as e:
            r.error = f"{type(e).__name__}: {e}"
            out.append(r)
            continue
        r.iterations = st.iterations
        r.convergence_class = st.convergence_class
        r.breakdown = st.breakdown
        r.final_recursive = st.final_recursive if st.b_norm > 0 else 0.0
        r.final_true = st.final_true if st.b_norm > 0 else 0.0
        r.true_to_recursive = st.true_to_recursive
        r.solve_time = st.wall_time
        out.append(r)
    return out


def _pair_records(records):
    """Fill ``increase_ratio`` on accelerated records with a completed baseline."""
    base = {}
    for r in records:
        if not r.accelerated:
            if r.key() in base:
                raise RuntimeError(f"duplicate baseline for {r.key()}")
            base[r.key()] = r
    for r in records:
        r.increase_ratio = None
        if r.accelerated:
            b = base.get(r.key())
            if b is not None and b.completed and r.completed and b.iterations > 0:
                r.increase_ratio = (r.iterations - b.iterations) / b.iterations
    return records


def _load_source(cfg):
    """(A, b, m) for the configured source; m is None for matrix files."""
    if cfg.problem is not None:
        A, b = generate(cfg.problem)
        return A, b, cfg.problem.m
    try:
        A = read_matrix_market(cfg.matrix)
    except (OSError, MatrixMarketError) as e:
        raise ConfigError(f"cannot read matrix {cfg.matrix}: {e}") from None
    return A, build_rhs_ones(A), None


def _prepare(A, b, scale):
    if not scale:
        return A, np.asarray(b, dtype=np.float64), ScalingRecord.identity(A.n)
    As, rec = diagonal_scale(A)
    return As, rec.scale_rhs(b), rec


def _map(fn, items, threads):
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))  # map keeps submission order


def run_sweep(cfg):
    """Run every cell of ``cfg``; returns records in config order.

    Problems with the source (unreadable file, zero diagonal when scaling)
    raise :class:`ConfigError` before any run.
    """
    A, b, m = _load_source(cfg)
    try:
        As, bs, scaling = _prepare(A, b, cfg.scaling)
    except ZeroDiagonalError as e:
        raise ConfigError(f"{cfg.source_id()}: {e}") from None
    scfg = cfg.solver_config(A.n, m)
    mid = cfg.source_id()
    threads = cfg.threads or thread_count()
    cells = cfg.factor_configs()

    def work(fc):
        return _run_cell(As, bs, scaling, mid, fc, cfg.flags, scfg, cfg.constrain)

    records = [r for group in _map(work, cells, threads) for r in group]
    return _pair_records(records)


# -- collection -----------------------------------------------------------

@dataclass(frozen=True)
class CollectionConfig:
    """Shifted ILU(0) vs shifted A²ILU(0) over a directory of matrices."""

    alphas: tuple = _grid(0.0, 0.1, 6)
    method: str = "cg"
    epsilon: float = 1e-8
    max_iters: int | None = None  # None: n
    true_residual_stride: int = 10
    scaling: bool = True
    constrain: bool = True
    threads: int | None = None

    def __post_init__(self):
        if not self.alphas:
            raise ConfigError("alphas must be nonempty")
        if not all(math.isfinite(a) for a in self.alphas):
            raise ConfigError("alphas must be finite")
        try:
            SolverConfig(self.method, self.epsilon, self.max_iters, self.true_residual_stride)
        except ValueError as e:
            raise ConfigError(str(e)) from None

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        unknown = set(d) - {f.name for f in fields(cls)}
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        if "alphas" in d:
            d["alphas"] = tuple(float(a) for a in d["alphas"])
        return cls(**d)


@dataclass
class CollectionReport:
    """Per-alpha trichotomy counts, increase-ratio histograms, skip list."""

    alphas: tuple
    matrices: list = field(default_factory=list)
    skipped: list = field(default_factory=list)  # [(file name, reason)]
    records: list = field(default_factory=list)

    def tally(self, accelerated):
        """{alpha: {class: count}} for one method."""
        out = {a: {CONVERGENT: 0, PSEUDO_CONVERGENT: 0, NOT_CONVERGENT: 0} for a in self.alphas}
        for r in self.records:
            if r.accelerated == accelerated:
                out[r.alpha][r.convergence_class] += 1
        return out

    def histogram(self, alpha):
        """Per-matrix increase-ratio buckets at ``alpha``."""
        counts = dict.fromkeys(HIST_BUCKETS, 0)
        for base, acc in self._pairs(alpha):
            counts[increase_bucket(base, acc)] += 1
        return counts

    def _pairs(self, alpha):
        by = {}
        for r in self.records:
            if r.alpha == alpha:
                by.setdefault(r.matrix_id, {})[r.accelerated] = r
        return [(d[False], d[True]) for _, d in sorted(by.items()) if len(d) == 2]


def increase_bucket(base, acc):
    """Histogram bucket of one matrix (convergence-aware, see module docs).

    Converging only with acceleration counts as below -50%, only without as
    above +50%; neither converging, or equal counts, is "no change".
    """
    cb = base.convergence_class == CONVERGENT
    ca = acc.convergence_class == CONVERGENT
    if not cb and not ca:
        return "no_change"
    if ca and not cb:
        return "below_-50%"
    if cb and not ca:
        return "above_+50%"
    if acc.iterations == base.iterations:
        return "no_change"
    ratio = (acc.iterations - base.iterations) / base.iterations
    if ratio < -0.5:
        return "below_-50%"
    if ratio < 0:
        return "-50%_to_0%"
    if ratio <= 0.5:
        return "0%_to_+50%"
    return "above_+50%"


def run_collection(directory, cfg=CollectionConfig()):
    """Run the shifted-ILU(0) collection experiment on every ``*.mtx`` file.

    Each matrix is scaled, b = A e, x0 = 0, and solved at every alpha with
    and without acceleration.  Files that cannot be used (zero diagonal,
    b = 0, unreadable) are listed in ``skipped`` with the reason.
    """
    directory = Path(directory)
    if not directory.is_dir():
        raise ConfigError(f"{directory} is not a directory")
    report = CollectionReport(alphas=tuple(cfg.alphas))
    cells = [FactorizationConfig("shifted_ilu0", alpha=float(a)) for a in cfg.alphas]
    threads = cfg.threads or thread_count()
    for path in sorted(directory.glob("*.mtx")):
        try:
            A = read_matrix_market(path)
        except MatrixMarketError as e:
            report.skipped.append((path.name, f"unreadable: {e}"))
            continue
        zero = A.zero_diagonal_rows
        if zero.size:
            report.skipped.append((path.name, f"zero diagonal in {zero.size} row(s)"))
            continue
        b = build_rhs_ones(A)
        if not np.any(b):
            report.skipped.append((path.name, "b = A e is the zero vector"))
            continue
        As, bs, scaling = _prepare(A, b, cfg.scaling)
        scfg = SolverConfig(cfg.method, cfg.epsilon, cfg.max_iters or A.n,
                            cfg.true_residual_stride)
        mid = path.stem

        def work(fc):
            return _run_cell(As, bs, scaling, mid, fc, (False, True), scfg, cfg.constrain)

        report.matrices.append(mid)
        report.records += [r for g in _map(work, cells, threads) for r in g]
    _pair_records(report.records)
    return report


# -- serialization --------------------------------------------------------

def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return format(v, ".17g")
    return str(v)


def _parse(name, text):
    if text == "":
        return None
    kind = _FIELD_TYPES.get(name, float)
    if kind is bool:
        if text not in ("true", "false"):
            raise ValueError(f"bad boolean {text!r} in column {name!r}")
        return text == "true"
    return kind(text)


def _json_value(v):
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if not math.isfinite(v):
            return "nan" if math.isnan(v) else ("inf" if v > 0 else "-inf")
        return v
    if isinstance(v, np.integer):
        return int(v)
    return v


def _from_json_value(name, v):
    if isinstance(v, str) and _FIELD_TYPES.get(name, float) is float:
        return float(v)
    return v


def _write_csv(path, columns, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_fmt(row[c]) for c in columns])


def alpha_key(a):
    """Mapping key for an alpha value in JSON reports (shortest round-trip repr)."""
    return repr(float(a))


def timings_path(path):
    path = Path(path)
    return path.with_name(path.stem + ".timings.csv")


def emit_report(records, path, fmt=None, allow_empty=True, config=None):
    """Write ``records`` as CSV (plus timing sidecar) or JSON.

    ``fmt`` defaults from the suffix (``.json`` -> JSON, else CSV).  Returns
    the list of files written.
    """
    if not records and not allow_empty:
        raise ValueError("no records to write")
    path = Path(path)
    fmt = fmt or ("json" if path.suffix.lower() == ".json" else "csv")
    rows = [asdict(r) for r in records]
    if fmt == "csv":
        _write_csv(path, CSV_COLUMNS, rows)
        tpath = timings_path(path)
        _write_csv(tpath, _KEY_COLUMNS + TIMING_COLUMNS, rows)
        return [path, tpath]
    if fmt != "json":
        raise ValueError(f"unknown report format {fmt!r}")
    doc = {
        "schema_version": SCHEMA_VERSION,
        "kind": "sweep",
        "config": _config_json(config) if config is not None else None,
        "records": [{k: _json_value(v) for k, v in row.items()} for row in rows],
    }
    validate_report(doc)
    path.write_text(json.dumps(doc, indent=1) + "\n")
    return [path]


def _jsonable(v):
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    return _json_value(v)


def _config_json(cfg):
    return _jsonable(asdict(cfg))


def emit_collection_report(report, path):
    """Write a collection report as JSON (and its records as CSV alongside)."""
    path = Path(path)
    tally = {}
    for name, flag in (("shifted_ilu0", False), ("shifted_a2ilu0", True)):
        tally[name] = {alpha_key(a): counts for a, counts in report.tally(flag).items()}
    doc = {
        "schema_version": SCHEMA_VERSION,
        "kind": "collection",
        "alphas": [float(a) for a in report.alphas],
        "matrices": list(report.matrices),
        "skipped": [{"file": f, "reason": why} for f, why in report.skipped],
        "tally": tally,
        "histograms": {alpha_key(a): report.histogram(a) for a in report.alphas},
        "records": [{k: _json_value(v) for k, v in asdict(r).items()} for r in report.records],
    }
    validate_report(doc)
    path.write_text(json.dumps(doc, indent=1) + "\n")
    written = [path]
    written += emit_report(report.records, path.with_suffix(".csv"), "csv")
    return written


def read_csv_report(path):
    """Records back from a CSV report (timing columns merged in if present)."""
    path = Path(path)
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if rows and tuple(rows[0].keys()) != CSV_COLUMNS:
        raise ValueError(f"{path}: unexpected columns")
    records = [RunRecord(**{k: _parse(k, v) for k, v in row.items()}) for row in rows]
    tpath = timings_path(path)
    if tpath.exists():
        with open(tpath, newline="") as fh:
            trows = list(csv.DictReader(fh))
        if len(trows) == len(records):
            for r, t in zip(records, trows):
                for c in TIMING_COLUMNS:
                    setattr(r, c, _parse(c, t[c]))
    return records


def read_json_report(path):
    """(document, records) from a JSON report, validated against its schema."""
    doc = json.loads(Path(path).read_text())
    validate_report(doc)
    records = [
        RunRecord(**{k: _from_json_value(k, v) for k, v in row.items()})
        for row in doc["records"]
    ]
    return doc, records


def load_schema(kind):
    name = {"sweep": "sweep_report.schema.json", "collection": "collection_report.schema.json"}
    text = resources.files("a2ilu").joinpath("schemas", name[kind]).read_text()
    return json.loads(text)


def validate_report(doc):
    """Validate a report document against the schema for its ``kind``."""
    import jsonschema

    kind = doc.get("kind")
    if kind not in ("sweep", "collection"):
        raise ValueError(f"unknown report kind {kind!r}")
    jsonschema.validate(doc, load_schema(kind))
    return doc


def records_with(records, **match):
    """Filter helper: records whose attributes equal every ``match`` item."""
    return [r for r in records if all(getattr(r, k) == v for k, v in match.items())]


def scalability_row(m, epsilon=1e-9, contrast=1e3, max_iters=None):
    """ILU(0) vs A²ILU(0) on the jump-coefficient Poisson problem at m^3.

    Returns iteration counts, optimized (phi, gamma), f at both parameter
    pairs, the speed-up ratios and the per-phase timings.
    """
    cfg = RunConfig(problem=ProblemSpec("poisson_jump", m, contrast=contrast),
                    epsilon=epsilon, max_iters=max_iters)
    base, acc = run_sweep(cfg)
    t_base = base.factor_time + base.solve_time
    t_acc = acc.factor_time + acc.accel_time + acc.solve_time
    return {
        "m": m,
        "n": base.n,
        "ilu_iterations": base.iterations,
        "a2_iterations": acc.iterations,
        "phi": acc.phi,
        "gamma": acc.gamma,
        "f_ilu": acc.f_initial,
        "f_a2": acc.f_final,
        "f_ratio": acc.f_final / acc.f_initial,
        "norm_ratio": math.sqrt(acc.f_final / acc.f_initial),
        "speedup_iterations": base.iterations / acc.iterations,
        "speedup_time": t_base / t_acc,
        "ilu_class": base.convergence_class,
        "a2_class": acc.convergence_class,
        "time_ilu": t_base,
        "time_a2": t_acc,
        "accel_time": acc.accel_time,
        "accel_fraction": acc.accel_time / t_acc,
    }
