"""Auto-acceleration of an ILU factorization.

The factors of any :class:`~a2ilu.factor.FactorTriple` are rescaled as

    M(phi, gamma) = (phi L + gamma D) (gamma D)^{-1} (gamma D + phi U)
                  = phi (L + U) + gamma D + (phi^2 / gamma) L D^{-1} U,

and (phi, gamma) is chosen to minimize f = ||(A - M) e||^2.  Because only
row sums of the remainder enter f, the triple product collapses to
t = L (D^{-1} (U e)); with s = A e, c = (L + U) e and d = diag(D) the i-th
row residual is

    v_i = s_i - phi c_i - gamma d_i - (phi^2 / gamma) t_i

and f, its gradient and Hessian are O(n) sums over these four vectors, or
O(1) quadratic forms in their 4 x 4 Gram matrix.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numba
import numpy as np

from .errors import BreakdownError, NumericError, PoleError
from .sparse import _backward, _forward

__all__ = [
    "AccelerationParams",
    "ObjectiveData",
    "NewtonState",
    "AccelResult",
    "build_objective",
    "objective",
    "gradient_hessian",
    "optimize",
    "make_preconditioner",
    "ILUPreconditioner",
    "AcceleratedILU",
    "IdentityPreconditioner",
]


@dataclass(frozen=True)
class AccelerationParams:
    phi: float = 1.0
    gamma: float = 1.0

    def __post_init__(self):
        if not (math.isfinite(self.phi) and math.isfinite(self.gamma)):
            raise ValueError(f"acceleration parameters must be finite, got {self}")
        if self.phi == 0.0:
            raise ValueError("phi must be nonzero")
        if self.gamma == 0.0:
            raise PoleError("gamma must be nonzero")

    @property
    def ratio(self):
        return self.gamma / self.phi

    def satisfies_constraint(self, slack=1e-12):
        return self.ratio <= 1.0 + slack


def _pair(p):
    if isinstance(p, AccelerationParams):
        return p.phi, p.gamma
    phi, gamma = p
    if gamma == 0.0:
        raise PoleError("objective has a pole at gamma = 0")
    return float(phi), float(gamma)


@dataclass(frozen=True, eq=False)
class ObjectiveData:
    """Row sums from which f(phi, gamma) is evaluated in O(n)."""

    s: np.ndarray
    c: np.ndarray
    d: np.ndarray
    t: np.ndarray

    @property
    def n(self):
        return self.s.shape[0]

    def moments(self):
        """(G, floor): Gram matrix of [s, c, d, t] and the rounding floor of f.

        f = w' G w with w = (1, -phi, -gamma, -phi^2/gamma), so the Newton
        iteration needs only G.  Objective values below ``floor`` are
        rounding noise in the row sums.
        """
        cached = self.__dict__.get("_moments")
        if cached is None:
            cached = _moments(self.s, self.c, self.d, self.t)
            object.__setattr__(self, "_moments", cached)
        return cached


@numba.njit(cache=True, nogil=True)
def _moments(s, c, d, t):
    G = np.zeros((4, 4))
    mag2 = 0.0
    for i in range(s.shape[0]):
        x0, x1, x2, x3 = s[i], c[i], d[i], t[i]
        G[0, 0] += x0 * x0
        G[0, 1] += x0 * x1
        G[0, 2] += x0 * x2
        G[0, 3] += x0 * x3
        G[1, 1] += x1 * x1
        G[1, 2] += x1 * x2
        G[1, 3] += x1 * x3
        G[2, 2] += x2 * x2
        G[2, 3] += x2 * x3
        G[3, 3] += x3 * x3
        m = abs(x0) + abs(x1) + abs(x2) + abs(x3)
        mag2 += m * m
    for a in range(4):
        for b in range(a):
            G[a, b] = G[b, a]
    eps = np.finfo(np.float64).eps
    return G, (64.0 * eps) ** 2 * mag2


def _fgh_gram(G, phi, gamma):
    """f, g, H from the Gram matrix; O(1)."""
    ig = 1.0 / gamma
    a = phi * phi * ig
    w = np.array([1.0, -phi, -gamma, -a])
    wp = np.array([0.0, -1.0, 0.0, -2.0 * phi * ig])
    wg = np.array([0.0, 0.0, -1.0, a * ig])
    Gw, Gwp, Gwg = G @ w, G @ wp, G @ wg
    f = w @ Gw
    g = np.array([2.0 * (wp @ Gw), 2.0 * (wg @ Gw)])
    w3 = Gw[3]
    h00 = 2.0 * (wp @ Gwp + w3 * (-2.0 * ig))
    h01 = 2.0 * (wp @ Gwg + w3 * (2.0 * phi * ig * ig))
    h11 = 2.0 * (wg @ Gwg + w3 * (-2.0 * a * ig * ig))
    return f, g, np.array([[h00, h01], [h01, h11]])


@numba.njit(cache=True, nogil=True)
def _rows(n, a_ptr, a_val, l_ptr, l_idx, l_val, u_ptr, u_val, D):
    s = np.empty(n)
    c = np.empty(n)
    t = np.empty(n)
    ue = np.empty(n)
    for i in range(n):
        acc = 0.0
        for q in range(u_ptr[i], u_ptr[i + 1]):
            acc += u_val[q]
        ue[i] = acc / D[i]
        c[i] = acc
    for i in range(n):
        acc = 0.0
        for q in range(a_ptr[i], a_ptr[i + 1]):
            acc += a_val[q]
        s[i] = acc
        lsum = 0.0
        tacc = 0.0
        for q in range(l_ptr[i], l_ptr[i + 1]):
            lsum += l_val[q]
            tacc += l_val[q] * ue[l_idx[q]]
        c[i] += lsum
        t[i] = tacc
    return s, c, t


def build_objective(A, F):
    """Collect (s, c, d, t) for ``A`` and its factorization ``F``.

    t = L D^{-1} U e costs two sparse row sweeps, for any factor pattern.
    """
    n = A.n
    if F.n != n:
        raise ValueError(f"factor size {F.n} does not match matrix size {n}")
    D = F.D
    zero = np.flatnonzero(D == 0.0)
    if zero.size:
        raise NumericError(f"zero pivot in row {zero[0]}", row=int(zero[0]))
    L, U = F.L, F.U
    s, c, t = _rows(
        n, A.row_ptr, A.values, L.row_ptr, L.col_idx, L.values, U.row_ptr, U.values, D
    )
    bad = np.flatnonzero(~np.isfinite(s + c + t))
    if bad.size:
        raise NumericError(f"non-finite row sum in row {bad[0]}", row=int(bad[0]))
    return ObjectiveData(s, c, D, t)


@numba.njit(cache=True, nogil=True)
def _fgh(s, c, d, t, phi, gamma):
    ig = 1.0 / gamma
    a = phi * phi * ig
    f = 0.0
    g0 = 0.0
    g1 = 0.0
    h00 = 0.0
    h01 = 0.0
    h11 = 0.0
    for i in range(s.shape[0]):
        ti = t[i]
        v = s[i] - phi * c[i] - gamma * d[i] - a * ti
        vp = -c[i] - 2.0 * phi * ig * ti
        vg = -d[i] + a * ig * ti
        vpp = -2.0 * ig * ti
        vpg = 2.0 * phi * ig * ig * ti
        vgg = -2.0 * a * ig * ig * ti
        f += v * v
        g0 += v * vp
        g1 += v * vg
        h00 += vp * vp + v * vpp
        h01 += vp * vg + v * vpg
        h11 += vg * vg + v * vgg
    return f, 2.0 * g0, 2.0 * g1, 2.0 * h00, 2.0 * h01, 2.0 * h11


@numba.njit(cache=True, nogil=True)
def _f(s, c, d, t, phi, gamma):
    a = phi * phi / gamma
    f = 0.0
    for i in range(s.shape[0]):
        v = s[i] - phi * c[i] - gamma * d[i] - a * t[i]
        f += v * v
    return f


def objective(obj, p):
    """f(phi, gamma) = sum_i (s_i - phi c_i - gamma d_i - phi^2/gamma t_i)^2."""
    phi, gamma = _pair(p)
    return _f(obj.s, obj.c, obj.d, obj.t, phi, gamma)


def gradient_hessian(obj, p):
    """Analytic gradient (2,) and Hessian (2, 2) of the objective."""
    phi, gamma = _pair(p)
    _, g0, g1, h00, h01, h11 = _fgh(obj.s, obj.c, obj.d, obj.t, phi, gamma)
    return np.array([g0, g1]), np.array([[h00, h01], [h01, h11]])


@dataclass(frozen=True)
class NewtonState:
    iteration: int
    phi: float
    gamma: float
    f: float
    g: tuple
    H: tuple
    step: str


@dataclass
class AccelResult:
    """Outcome of :func:`optimize`; the fields double as the run report."""

    params: AccelerationParams
    f_initial: float
    f_final: float
    iterations: int = 0
    converged: bool = False
    projected: bool = False
    fallback_steps: int = 0
    no_improvement: bool = False
    step_tol: float = 1e-10
    max_iter: int = 100
    history: list = field(default_factory=list, repr=False)

    @property
    def phi(self):
        return self.params.phi

    @property
    def gamma(self):
        return self.params.gamma

    def report(self):
        return {
            "f_initial": self.f_initial,
            "f_final": self.f_final,
            "iterations": self.iterations,
            "phi": self.phi,
            "gamma": self.gamma,
            "converged": self.converged,
            "projected": self.projected,
            "fallback_steps": self.fallback_steps,
            "no_improvement": self.no_improvement,
            "step_tol": self.step_tol,
            "max_iter": self.max_iter,
        }


_MAX_HALVINGS = 60
_ARMIJO = 1e-4


def optimize(obj, max_iter=100, step_tol=1e-10, constrain=True, keep_history=False):
    """Minimize the objective by safeguarded Newton-Raphson from (1, 1).

    A step is the Newton step when the Hessian is positive definite and a
    gradient step otherwise; it is halved while it would flip the sign of
    gamma and then until it gives sufficient decrease.  Iteration stops once
    the accepted step is below ``step_tol`` in max-norm.  With ``constrain``
    a result with gamma/phi > 1 is projected onto gamma = phi.

    The iterations work on the Gram form of the objective (O(1) per step);
    the reported initial and final values are direct O(n) sums.  The result
    is never worse than (1, 1): if nothing better is found, (1, 1) comes back
    with ``no_improvement`` set.
    """
    s, c, d, t = obj.s, obj.c, obj.d, obj.t
    G, floor = obj.moments()
    phi, gamma = 1.0, 1.0
    f0 = _f(s, c, d, t, phi, gamma)
    res = AccelResult(AccelerationParams(), f0, f0, step_tol=step_tol, max_iter=max_iter)
    if not math.isfinite(f0):
        raise NumericError("objective is not finite at (1, 1)")
    if f0 <= floor:
        res.no_improvement = True
        res.converged = True
        return res

    for it in range(max_iter):
        f, g, H = _fgh_gram(G, phi, gamma)
        det = H[0, 0] * H[1, 1] - H[0, 1] * H[0, 1]
        if det > 0.0 and H[0, 0] + H[1, 1] > 0.0:
            step = -np.linalg.solve(H, g)
            kind = "newton"
        else:
            gn2 = g @ g
            if gn2 == 0.0:
                res.converged = True
                break
            step = -g * (abs(f) / gn2)
            kind = "gradient"
            res.fallback_steps += 1
        if keep_history:
            res.history.append(
                NewtonState(it, phi, gamma, f, tuple(g), (H[0, 0], H[0, 1], H[1, 1]), kind)
            )

        for _ in range(_MAX_HALVINGS):
            if (gamma + step[1]) * gamma > 0.0:
                break
            step *= 0.5
        slope = g @ step
        accepted = False
        for _ in range(_MAX_HALVINGS):
            trial = _fgh_gram(G, phi + step[0], gamma + step[1])[0]
            small = np.max(np.abs(step)) <= step_tol
            if math.isfinite(trial) and (
                trial <= f + _ARMIJO * slope or (small and trial <= f)
            ):
                accepted = True
                break
            if small:
                break
            step *= 0.5
        res.iterations = it + 1
        if not accepted:
            res.converged = True
            break
        phi += step[0]
        gamma += step[1]
        if np.max(np.abs(step)) <= step_tol:
            res.converged = True
            break

    if constrain and gamma / phi > 1.0:
        gamma = phi
        res.projected = True
    f_final = _f(s, c, d, t, phi, gamma)
    if not f_final < f0:
        res.no_improvement = True
        return res
    res.params = AccelerationParams(float(phi), float(gamma))
    res.f_final = float(f_final)
    return res


# -- preconditioners ------------------------------------------------------

class IdentityPreconditioner:
    def __call__(self, r):
        return np.array(r, dtype=np.float64)

    apply = __call__


class ILUPreconditioner:
    """z = M^{-1} r for M = (L + D) D^{-1} (D + U).

    Applied as a forward solve with (L + D) followed by a backward solve
    with (D + U) on D w.
    """

    def __init__(self, F):
        zero = np.flatnonzero(F.D == 0.0)
        if zero.size:
            raise BreakdownError(f"zero pivot in row {zero[0]}", row=int(zero[0]))
        self.factors = F
        self.n = F.n
        self._set(F.L, F.D, F.U)

    def _set(self, L, D, U):
        self._L, self._D, self._U = L, D, U

    def __call__(self, r):
        n, L, D, U = self.n, self._L, self._D, self._U
        w = _forward(n, L.row_ptr, L.col_idx, L.values, D, r, np.empty(n))
        return _backward(n, U.row_ptr, U.col_idx, U.values, D, D * w, np.empty(n))

    apply = __call__


class AcceleratedILU(ILUPreconditioner):
    """M = (phi L + gamma D) (gamma D)^{-1} (gamma D + phi U).

    The scaled factors are built once; at (1, 1) the arithmetic is exactly
    that of :class:`ILUPreconditioner`.
    """

    def __init__(self, F, params):
        self.params = params
        super().__init__(F)

    def _set(self, L, D, U):
        phi, gamma = self.params.phi, self.params.gamma
        self._L = L.with_values(phi * L.values, symmetric=False)
        self._U = U.with_values(phi * U.values, symmetric=False)
        self._D = gamma * D


def make_preconditioner(F, p=None):
    """Accelerated ILU applicator for ``F`` at ``p`` (plain ILU if ``p`` is None)."""
    if p is None:
        return ILUPreconditioner(F)
    if not isinstance(p, AccelerationParams):
        p = AccelerationParams(*p)
    return AcceleratedILU(F, p)
