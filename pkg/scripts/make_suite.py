#!/usr/bin/env python3
"""Generate the curated Matrix Market suite used by the collection experiment.

All matrices are real, square, numerically symmetric and come from 2D/3D
discretizations, mirroring the selection rules of the collection study.  They
are deliberately varied: M-matrices, strong anisotropy and coefficient jumps,
a fourth-order operator with positive off-diagonals, and indefinite Helmholtz
operators on which CG is expected to struggle.  One saddle-point matrix with
zero diagonal entries is included to exercise the skip list.

Usage:  python scripts/make_suite.py [--out data/suite]
"""
import argparse
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from a2ilu.problems import gen_helmholtz, gen_poisson_jump, helmholtz_critical_shift
from a2ilu.sparse import SparseMatrix, write_matrix_market

SEED = 20120401


def lap1d(m):
    return sp.diags([-np.ones(m - 1), 2 * np.ones(m), -np.ones(m - 1)], [-1, 0, 1])


def lap2d(m, ax=1.0, ay=1.0):
    I = sp.identity(m)
    return (ax * sp.kron(I, lap1d(m)) + ay * sp.kron(lap1d(m), I)).tocsr()


def q1_laplacian(m):
    """Bilinear finite-element stiffness matrix on an m x m interior grid (9-point)."""
    M1 = sp.diags([np.full(m - 1, 1 / 6), np.full(m, 2 / 3), np.full(m - 1, 1 / 6)], [-1, 0, 1])
    K1 = lap1d(m)
    return (sp.kron(K1, M1) + sp.kron(M1, K1)).tocsr()


def variable_diffusion2d(m, kappa):
    """5-point FV diffusion with harmonic face coefficients; kappa on an m x m grid."""
    n = m * m
    idx = np.arange(n).reshape(m, m)
    rows, cols, vals = [], [], []
    diag = np.zeros((m, m))
    for axis in (0, 1):
        lo = [slice(None)] * 2
        hi = [slice(None)] * 2
        lo[axis], hi[axis] = slice(0, m - 1), slice(1, m)
        lo, hi = tuple(lo), tuple(hi)
        k = 2 * kappa[lo] * kappa[hi] / (kappa[lo] + kappa[hi])
        rows += [idx[lo].ravel(), idx[hi].ravel()]
        cols += [idx[hi].ravel(), idx[lo].ravel()]
        vals += [-k.ravel(), -k.ravel()]
        diag[lo] += k
        diag[hi] += k
        # Dirichlet walls
        for layer in (0, m - 1):
            sl = [slice(None)] * 2
            sl[axis] = slice(layer, layer + 1)
            diag[tuple(sl)] += kappa[tuple(sl)]
    rows.append(idx.ravel())
    cols.append(idx.ravel())
    vals.append(diag.ravel())
    return sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)
    ).tocsr()


def biharmonic2d(m):
    L = lap2d(m)
    return (L @ L).tocsr()


def l_shaped(m):
    """5-point Laplacian restricted to an L-shaped subset of the m x m grid."""
    L = lap2d(m)
    i, j = np.divmod(np.arange(m * m), m)
    keep = np.flatnonzero(~((i >= m // 2) & (j >= m // 2)))
    return L[keep][:, keep].tocsr()


def saddle_point(m):
    """[[K, B'], [B, 0]]: a discrete Stokes-like system with a zero (2,2) block."""
    K = lap2d(m)
    rng = np.random.default_rng(SEED)
    B = sp.random(m, m * m, density=4.0 / (m * m), random_state=rng, format="csr")
    B = B + sp.eye(m, m * m)
    return sp.bmat([[K, B.T], [B, None]]).tocsr()


def build_suite():
    rng = np.random.default_rng(SEED)
    out = {}
    out["poisson3d_jump_m12"] = gen_poisson_jump(12)[0].to_scipy()
    out["poisson3d_jump1e6_m10"] = gen_poisson_jump(10, contrast=1e6)[0].to_scipy()
    out["laplace2d_m40"] = lap2d(40)
    out["aniso2d_1e-3_m40"] = lap2d(40, 1.0, 1e-3)
    out["q1fem2d_m30"] = q1_laplacian(30)
    kappa = np.exp(rng.normal(0.0, 2.0, size=(40, 40)))
    out["lognormal2d_m40"] = variable_diffusion2d(40, kappa)
    checker = np.where((np.add.outer(np.arange(32) // 4, np.arange(32) // 4) % 2) == 0, 1e4, 1.0)
    out["checker2d_m32"] = variable_diffusion2d(32, checker)
    out["biharmonic2d_m24"] = biharmonic2d(24)
    out["lshape2d_m40"] = l_shaped(40)
    crit = helmholtz_critical_shift(12)
    out["helmholtz3d_spd_m12"] = gen_helmholtz(12, 0.5 * crit)[0].to_scipy()
    out["helmholtz3d_indef_m12"] = gen_helmholtz(12, 2.5 * crit)[0].to_scipy()
    h = 1.0 / 41
    out["helmholtz2d_indef_m40"] = (lap2d(40) - 0.9 * (2 * np.pi) ** 2 * h * h * sp.identity(1600)).tocsr()
    out["saddle_stokes_m12"] = saddle_point(12)
    return out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default=str(Path(__file__).resolve().parents[1] / "data" / "suite"))
    args = ap.parse_args(argv)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for name, M in build_suite().items():
        M = sp.csr_matrix(M, copy=True)
        M.eliminate_zeros()  # kron/diags products store zero band entries
        A = SparseMatrix.from_scipy(M)
        if not A.symmetric:
            raise SystemExit(f"{name} is not symmetric")
        path = out / f"{name}.mtx"
        write_matrix_market(path, A, symmetric=True, comment=name)
        print(f"{path}: n={A.n} nnz={A.nnz}")


if __name__ == "__main__":
    main()
