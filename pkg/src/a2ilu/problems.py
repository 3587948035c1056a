"""7-point finite-volume test matrices on the unit cube.

Grid: ``m`` points per axis at x_i = i h, i = 1..m, h = 1/(m+1); the zero
Dirichlet boundary is eliminated, so n = m**3.  Unknowns are numbered
lexicographically with x fastest:

    index(i, j, k) = i + m * (j + m * k)      (i along x, j along y, k along z)

Rows are in volume form: a face with coefficient kappa_f contributes
kappa_f * h (area h^2 over distance h), and source terms are multiplied by
the cell volume h^3.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ResourceLimitError
from .sparse import SparseMatrix, build_rhs_ones

__all__ = [
    "ProblemSpec",
    "generate",
    "gen_poisson_jump",
    "gen_helmholtz",
    "gen_advection_diffusion",
    "helmholtz_critical_shift",
    "grid_index",
]

KINDS = ("poisson_jump", "helmholtz", "advection_diffusion")
# ~ 7 nnz/row * (8 B value + 8 B index) plus vectors, per unknown
_BYTES_PER_UNKNOWN = 200
MEMORY_BUDGET = 16 * 2**30


@dataclass(frozen=True)
class ProblemSpec:
    kind: str = "poisson_jump"
    m: int = 10
    contrast: float = 1e3
    shift: float = 0.0
    velocity: tuple = (1.0, 1.0, 1.0)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown problem kind {self.kind!r}; expected one of {KINDS}")
        if int(self.m) != self.m or self.m < 2:
            raise ValueError("m must be an integer >= 2")

    @property
    def n(self):
        return self.m**3

    @property
    def h(self):
        return 1.0 / (self.m + 1)

    def label(self):
        if self.kind == "poisson_jump":
            return f"poisson_jump_m{self.m}_k{self.contrast:g}"
        if self.kind == "helmholtz":
            return f"helmholtz_m{self.m}_s{self.shift:g}"
        vx, vy, vz = self.velocity
        return f"advection_diffusion_m{self.m}_v{vx:g},{vy:g},{vz:g}"


def grid_index(i, j, k, m):
    return i + m * (j + m * k)


def _check_size(m):
    if _BYTES_PER_UNKNOWN * m**3 > MEMORY_BUDGET:
        raise ResourceLimitError(f"m={m} ({m**3} unknowns) exceeds the memory budget")


def _jump_kappa(contrast):
    def kappa(x, y, z):
        inside = (
            (x >= 0.25) & (x <= 0.75) & (y >= 0.25) & (y <= 0.75) & (z >= 0.25) & (z <= 0.75)
        )
        return np.where(inside, contrast, 1.0)

    return kappa


def _harmonic(a, b):
    return 2.0 * a * b / (a + b)


def _diffusion(m, kappa):
    """Assemble -div(kappa grad u) with harmonic-mean face coefficients."""
    _check_size(m)
    h = 1.0 / (m + 1)
    x = np.arange(1, m + 1) * h
    # arrays indexed [k, j, i]; C-order ravel gives x fastest
    Z, Y, X = np.meshgrid(x, x, x, indexing="ij")
    kap = kappa(X, Y, Z)
    idx = np.arange(m**3, dtype=np.int64).reshape(m, m, m)
    diag = np.zeros((m, m, m))
    rows, cols, vals = [], [], []
    coords = (Z, Y, X)
    for axis in range(3):
        lo = [slice(None)] * 3
        hi = [slice(None)] * 3
        lo[axis] = slice(0, m - 1)
        hi[axis] = slice(1, m)
        lo, hi = tuple(lo), tuple(hi)
        coef = _harmonic(kap[lo], kap[hi]) * h
        rows += [idx[lo].ravel(), idx[hi].ravel()]
        cols += [idx[hi].ravel(), idx[lo].ravel()]
        vals += [-coef.ravel(), -coef.ravel()]
        diag[lo] += coef
        diag[hi] += coef
        for layer, wall in ((0, 0.0), (m - 1, 1.0)):
            sl = [slice(None)] * 3
            sl[axis] = slice(layer, layer + 1)
            sl = tuple(sl)
            at_wall = [c[sl] for c in coords]
            at_wall[axis] = np.full_like(at_wall[axis], wall)
            kb = kappa(at_wall[2], at_wall[1], at_wall[0])
            diag[sl] += _harmonic(kap[sl], kb) * h
    rows.append(idx.ravel())
    cols.append(idx.ravel())
    vals.append(diag.ravel())
    return np.concatenate(rows), np.concatenate(cols), np.concatenate(vals), (X, Y, Z)


def gen_poisson_jump(m, contrast=1e3):
    """-div(kappa grad u) = x + y + z on (0,1)^3, u = 0 on the boundary.

    kappa = ``contrast`` on [1/4, 3/4]^3 and 1 elsewhere (pass contrast=1
    for the plain Laplacian).  Returns (A, b); A is SPD.
    """
    rows, cols, vals, (X, Y, Z) = _diffusion(m, _jump_kappa(contrast))
    n = m**3
    A = SparseMatrix.from_coo(n, rows, cols, vals)
    h = 1.0 / (m + 1)
    b = ((X + Y + Z) * h**3).ravel()
    return A, b


def helmholtz_critical_shift(m):
    """Largest shift for which :func:`gen_helmholtz` stays positive definite."""
    h = 1.0 / (m + 1)
    lam_min = 3.0 * h * (2.0 - 2.0 * np.cos(np.pi * h))
    return lam_min / h**3


def gen_helmholtz(m, shift):
    """Laplacian minus shift * h^3 * I; rhs = A e.

    Positive definite iff shift < helmholtz_critical_shift(m) (about 3 pi^2).
    """
    rows, cols, vals, _ = _diffusion(m, _jump_kappa(1.0))
    n = m**3
    rows = np.concatenate([rows, np.arange(n)])
    cols = np.concatenate([cols, np.arange(n)])
    h = 1.0 / (m + 1)
    vals = np.concatenate([vals, np.full(n, -shift * h**3)])
    A = SparseMatrix.from_coo(n, rows, cols, vals)
    return A, build_rhs_ones(A)


def gen_advection_diffusion(m, velocity=(1.0, 1.0, 1.0)):
    """-lap(u) + div(v u) with first-order upwind fluxes; rhs = A e.

    The advective flux through a face is v_a h^2 times the upwind value, so
    the advection part has zero row sums away from the inflow boundary.
    """
    rows, cols, vals, _ = _diffusion(m, _jump_kappa(1.0))
    n = m**3
    h = 1.0 / (m + 1)
    idx = np.arange(n, dtype=np.int64).reshape(m, m, m)
    extra_r, extra_c, extra_v = [rows], [cols], [vals]
    # velocity components in (x, y, z); array axes are (z, y, x)
    for comp, axis in ((0, 2), (1, 1), (2, 0)):
        v = float(velocity[comp])
        if v == 0.0:
            continue
        flux = abs(v) * h * h
        lo = [slice(None)] * 3
        hi = [slice(None)] * 3
        lo[axis] = slice(0, m - 1)
        hi[axis] = slice(1, m)
        up, down = (tuple(lo), tuple(hi)) if v > 0 else (tuple(hi), tuple(lo))
        up_idx, down_idx = idx[up].ravel(), idx[down].ravel()
        # interior faces: upwind cell loses, downwind cell gains
        extra_r += [up_idx, down_idx]
        extra_c += [up_idx, up_idx]
        extra_v += [np.full(up_idx.size, flux), np.full(up_idx.size, -flux)]
        # outflow through the downstream wall
        wall = [slice(None)] * 3
        wall[axis] = slice(m - 1, m) if v > 0 else slice(0, 1)
        w_idx = idx[tuple(wall)].ravel()
        extra_r.append(w_idx)
        extra_c.append(w_idx)
        extra_v.append(np.full(w_idx.size, flux))
    A = SparseMatrix.from_coo(
        n, np.concatenate(extra_r), np.concatenate(extra_c), np.concatenate(extra_v)
    )
    return A, build_rhs_ones(A)


def generate(spec):
    """Build (A, b) for a :class:`ProblemSpec`."""
    if spec.kind == "poisson_jump":
        return gen_poisson_jump(spec.m, spec.contrast)
    if spec.kind == "helmholtz":
        return gen_helmholtz(spec.m, spec.shift)
    return gen_advection_diffusion(spec.m, spec.velocity)
