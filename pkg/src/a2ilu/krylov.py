"""Preconditioned CG and BiCGSTAB with true-residual monitoring.

Convergence is declared on the squared recursive residual,
||r_k||^2 / ||b||^2 <= epsilon.  The true residual s = b - A x is recomputed
every ``true_residual_stride`` iterations and at termination, and every
solve is sorted into one of three classes:

* ``convergent``: recursive criterion met and ||s||^2 / ||r||^2 <= 2.
* ``pseudo_convergent``: the true residual has stagnated above threshold
  (relative spread < ``stagnation_rtol`` over the last
  ``stagnation_window`` checkpoints) while the recursive criterion is met,
  or while the recursive residual is still decreasing at the iteration cap.
  "Above threshold" means ||s||^2 > 2 min(||r||^2, epsilon ||b||^2).
* ``not_convergent``: everything else, including breakdowns.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .sparse import _matvec

__all__ = [
    "CONVERGENT",
    "PSEUDO_CONVERGENT",
    "NOT_CONVERGENT",
    "SolverConfig",
    "SolveStats",
    "cg_solve",
    "bicgstab_solve",
    "solve",
    "classify_convergence",
]

CONVERGENT = "convergent"
PSEUDO_CONVERGENT = "pseudo_convergent"
NOT_CONVERGENT = "not_convergent"


@dataclass(frozen=True)
class SolverConfig:
    method: str = "cg"
    epsilon: float = 1e-9
    max_iters: int | None = None  # None: the matrix size
    true_residual_stride: int = 10
    stagnation_window: int = 3
    stagnation_rtol: float = 1e-3

    def __post_init__(self):
        if self.method not in ("cg", "bicgstab"):
            raise ValueError(f"unknown method {self.method!r}")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be > 0")
        if self.max_iters is not None and self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.true_residual_stride < 1:
            raise ValueError("true_residual_stride must be >= 1")

    def cap(self, n):
        return n if self.max_iters is None else self.max_iters


@dataclass
class SolveStats:
    """Residual histories hold squared 2-norms (not relative)."""

    iterations: int = 0
    b_norm: float = 0.0
    recursive_residual_history: list = field(default_factory=list)
    true_residual_checkpoints: list = field(default_factory=list)  # (iteration, ||s||^2)
    convergence_class: str = NOT_CONVERGENT
    breakdown: str | None = None
    wall_time: float = 0.0
    preconditioner_setup_time: float = 0.0
    acceleration_time: float = 0.0

    @property
    def final_recursive(self):
        """||r||^2 / ||b||^2 at termination."""
        return self.recursive_residual_history[-1] / self.b_norm**2

    @property
    def final_true(self):
        """||s||^2 / ||b||^2 at termination."""
        return self.true_residual_checkpoints[-1][1] / self.b_norm**2

    @property
    def true_to_recursive(self):
        """||s||^2 / ||r||^2 at termination."""
        r2 = self.recursive_residual_history[-1]
        s2 = self.true_residual_checkpoints[-1][1]
        return s2 / r2 if r2 > 0 else (1.0 if s2 == 0 else np.inf)


def classify_convergence(stats, b_norm, cfg):
    """Convergent / pseudo-convergent / not convergent (see module docs)."""
    if not stats.true_residual_checkpoints:
        raise ValueError("classification needs at least one true-residual checkpoint")
    if stats.breakdown is not None:
        return NOT_CONVERGENT
    bb = b_norm * b_norm
    hist = stats.recursive_residual_history
    r2 = hist[-1]
    s_vals = [s for _, s in stats.true_residual_checkpoints]
    s2 = s_vals[-1]
    if not (np.isfinite(r2) and np.isfinite(s2)):
        return NOT_CONVERGENT
    if bb == 0.0:
        return CONVERGENT if s2 == 0.0 else NOT_CONVERGENT

    recursive_met = r2 <= cfg.epsilon * bb
    if recursive_met and s2 <= 2.0 * r2:
        return CONVERGENT

    w = cfg.stagnation_window
    stagnant = False
    if len(s_vals) >= w:
        last = np.sqrt(np.asarray(s_vals[-w:]))
        top = last.max()
        stagnant = top > 0 and (top - last.min()) / top < cfg.stagnation_rtol
    above = s2 > 2.0 * min(r2, cfg.epsilon * bb)
    back = max(0, len(hist) - 1 - cfg.true_residual_stride)
    still_decreasing = len(hist) > 1 and hist[-1] < hist[back]
    if stagnant and above and (recursive_met or still_decreasing):
        return PSEUDO_CONVERGENT
    return NOT_CONVERGENT


class _Operator:
    def __init__(self, A):
        self.A = A
        self.n = A.n

    def __call__(self, x, out=None):
        A = self.A
        if out is None:
            out = np.empty(self.n)
        return _matvec(A.n, A.row_ptr, A.col_idx, A.values, x, out)


def _start(A, b, x0):
    b = np.asarray(b, dtype=np.float64)
    if b.shape != (A.n,):
        raise ValueError(f"b has shape {b.shape}, expected ({A.n},)")
    x = np.zeros(A.n) if x0 is None else np.array(x0, dtype=np.float64)
    if x.shape != (A.n,):
        raise ValueError(f"x0 has shape {x.shape}, expected ({A.n},)")
    return b, x


def _finish(stats, op, b, x, cfg, k, scaling, t0):
    if not stats.true_residual_checkpoints or stats.true_residual_checkpoints[-1][0] != k:
        s = b - op(x)
        stats.true_residual_checkpoints.append((k, float(s @ s)))
    stats.iterations = k
    stats.convergence_class = classify_convergence(stats, stats.b_norm, cfg)
    stats.wall_time = time.perf_counter() - t0
    if scaling is not None:
        x = scaling.unscale_solution(x)
    return x, stats


def cg_solve(A, M_apply, b, x0=None, cfg=SolverConfig(), scaling=None):
    """Preconditioned conjugate gradients for symmetric ``A``.

    ``M_apply(r)`` returns M^{-1} r (None means no preconditioning).  The
    returned ``x`` is unscaled with ``scaling`` when one is given.
    """
    t0 = time.perf_counter()
    op = _Operator(A)
    b, x = _start(A, b, x0)
    M = M_apply if M_apply is not None else (lambda r: r.copy())
    stride = cfg.true_residual_stride
    stats = SolveStats(b_norm=float(np.sqrt(b @ b)))
    bb = stats.b_norm**2
    target = cfg.epsilon * bb

    r = b - op(x) if x0 is not None else b.copy()
    rr = float(r @ r)
    stats.recursive_residual_history.append(rr)
    k = 0
    if rr <= target:
        return _finish(stats, op, b, x, cfg, k, scaling, t0)
    z = M(r)
    p = z.copy()
    rz = float(r @ z)
    q = np.empty(A.n)
    for k in range(1, cfg.cap(A.n) + 1):
        op(p, q)
        pq = float(p @ q)
        if not pq > 0.0:
            stats.breakdown = f"p'Ap = {pq!r} at iteration {k}"
            k -= 1
            break
        alpha = rz / pq
        x += alpha * p
        r -= alpha * q
        rr = float(r @ r)
        stats.recursive_residual_history.append(rr)
        if k % stride == 0:
            s = b - op(x)
            stats.true_residual_checkpoints.append((k, float(s @ s)))
        if rr <= target or not np.isfinite(rr):
            break
        z = M(r)
        rz_new = float(r @ z)
        if rz_new == 0.0 or not np.isfinite(rz_new):
            stats.breakdown = f"r'z = {rz_new!r} at iteration {k}"
            break
        p *= rz_new / rz
        p += z
        rz = rz_new
    return _finish(stats, op, b, x, cfg, k, scaling, t0)


def bicgstab_solve(A, M_apply, b, x0=None, cfg=SolverConfig(method="bicgstab"), scaling=None):
    """Right-preconditioned BiCGSTAB for general ``A``."""
    t0 = time.perf_counter()
    op = _Operator(A)
    b, x = _start(A, b, x0)
    M = M_apply if M_apply is not None else (lambda r: r.copy())
    stride = cfg.true_residual_stride
    stats = SolveStats(b_norm=float(np.sqrt(b @ b)))
    target = cfg.epsilon * stats.b_norm**2

    r = b - op(x) if x0 is not None else b.copy()
    rr = float(r @ r)
    stats.recursive_residual_history.append(rr)
    k = 0
    if rr <= target:
        return _finish(stats, op, b, x, cfg, k, scaling, t0)
    rhat = r.copy()
    rho = alpha = omega = 1.0
    p = np.zeros(A.n)
    v = np.zeros(A.n)
    for k in range(1, cfg.cap(A.n) + 1):
        rho_new = float(rhat @ r)
        if rho_new == 0.0 or not np.isfinite(rho_new):
            stats.breakdown = f"rho = {rho_new!r} at iteration {k}"
            k -= 1
            break
        if k == 1:
            p[:] = r
        else:
            beta = (rho_new / rho) * (alpha / omega)
            p = r + beta * (p - omega * v)
        y = M(p)
        op(y, v)
        rv = float(rhat @ v)
        if rv == 0.0 or not np.isfinite(rv):
            stats.breakdown = f"(rhat, v) = {rv!r} at iteration {k}"
            k -= 1
            break
        alpha = rho_new / rv
        s = r - alpha * v
        ss = float(s @ s)
        if ss <= target:
            x += alpha * y
            r = s
            stats.recursive_residual_history.append(ss)
            break
        z = M(s)
        t = op(z)
        tt = float(t @ t)
        if tt == 0.0 or not np.isfinite(tt):
            stats.breakdown = f"(t, t) = {tt!r} at iteration {k}"
            k -= 1
            break
        omega = float(t @ s) / tt
        x += alpha * y + omega * z
        r = s - omega * t
        rr = float(r @ r)
        stats.recursive_residual_history.append(rr)
        if k % stride == 0:
            sv = b - op(x)
            stats.true_residual_checkpoints.append((k, float(sv @ sv)))
        if rr <= target or not np.isfinite(rr):
            break
        if omega == 0.0:
            stats.breakdown = f"omega = 0 at iteration {k}"
            break
        rho = rho_new
    return _finish(stats, op, b, x, cfg, k, scaling, t0)


def solve(A, M_apply, b, x0=None, cfg=SolverConfig(), scaling=None):
    """Dispatch on ``cfg.method``."""
    f = cg_solve if cfg.method == "cg" else bicgstab_solve
    return f(A, M_apply, b, x0, cfg, scaling)
