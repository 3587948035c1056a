import math

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given
from hypothesis import strategies as st

from a2ilu.errors import BreakdownError, ResourceLimitError, ZeroDiagonalError
from a2ilu.factor import (
    FactorizationConfig,
    crout_fill_cap,
    crout_ilu,
    factorize,
    ilu0,
    level_ilu,
    level_pattern,
    milu0,
    shifted_ilu0,
)
from a2ilu.problems import gen_poisson_jump
from a2ilu.sparse import SparseMatrix, diagonal_scale
from oracles import (
    dense_crout,
    dense_ilu_pattern,
    dense_levels,
    dense_lu,
    dense_M,
    dense_parts,
    lap2d,
    random_sparse,
    tridiag,
)


def _sp(a):
    return SparseMatrix.from_dense(a)


def _bitwise(F, G):
    return (
        F.L.same_pattern(G.L)
        and F.U.same_pattern(G.U)
        and np.array_equal(F.L.values, G.L.values)
        and np.array_equal(F.U.values, G.U.values)
        and np.array_equal(F.D, G.D)
    )


def _pattern_of(A):
    return A.to_dense() != 0 | np.eye(A.n, dtype=bool)


FIXTURES = {
    "tridiag": tridiag,
    "lap2d_4": lambda: lap2d(4),
    "lap2d_5": lambda: lap2d(5),
    "poisson3d_3": lambda: diagonal_scale(gen_poisson_jump(3)[0])[0],
}


# -- ILU(0) ---------------------------------------------------------------

def test_ilu0_tridiagonal_is_exact_lu():
    F = ilu0(tridiag())
    assert np.allclose(F.D, [4.0, 3.75, 4 - 1 / 3.75], rtol=0, atol=1e-15)
    assert np.array_equal(F.L.to_dense(), [[0, 0, 0], [1, 0, 0], [0, 1, 0]])
    assert np.array_equal(F.U.to_dense(), [[0, 1, 0], [0, 0, 1], [0, 0, 0]])
    L, D, U = dense_parts(F)
    assert np.max(np.abs(tridiag().to_dense() - dense_M(L, D, U))) <= 1e-15


def test_ilu0_identity():
    F = ilu0(SparseMatrix.identity(4))
    assert F.L.nnz == 0 and F.U.nnz == 0 and np.array_equal(F.D, np.ones(4))


def test_ilu0_laplacian_remainder_only_at_fill():
    A = lap2d(4)
    a = A.to_dense()
    L, D, U = dense_parts(ilu0(A))
    R = a - dense_M(L, D, U)
    on = a != 0
    assert np.max(np.abs(R[on])) <= 1e-14
    assert np.max(np.abs(R[~on])) > 0.1  # fill was discarded somewhere


@pytest.mark.parametrize("name", sorted(FIXTURES))
def test_ilu0_matches_dense_pattern_oracle(name):
    A = FIXTURES[name]()
    a = A.to_dense()
    L, D, U = dense_parts(ilu0(A))
    Lr, Dr, Ur = dense_ilu_pattern(a, a != 0)
    assert np.allclose(D, Dr, rtol=1e-13, atol=0)
    assert np.allclose(L, Lr, rtol=1e-13, atol=1e-15)
    assert np.allclose(U, Ur, rtol=1e-13, atol=1e-15)


@pytest.mark.parametrize("name", sorted(FIXTURES))
@pytest.mark.parametrize("variant", ["ilu0", "shifted", "milu"])
def test_pattern_invariant(name, variant):
    A = FIXTURES[name]()
    F = {"ilu0": ilu0, "shifted": lambda A: shifted_ilu0(A, 0.3),
         "milu": lambda A: milu0(A, 0.7)}[variant](A)
    P = F.pattern()
    assert P.same_pattern(A)


def test_ilu0_zero_pivot_breakdown():
    A = _sp([[1.0, 1.0], [1.0, 1.0]])
    with pytest.raises(BreakdownError) as e:
        ilu0(A)
    assert e.value.row == 1


def test_ilu0_missing_diagonal():
    A = _sp([[1.0, 1.0], [1.0, 0.0]])
    with pytest.raises(ZeroDiagonalError):
        ilu0(A)


@pytest.mark.parametrize("kind", ["tridiag", "bidiag_lower", "bidiag_upper"])
def test_no_fill_equivalence(rng, kind):
    n = 12
    main = rng.uniform(2, 4, n)
    off = rng.uniform(-1, 1, n - 1)
    a = np.diag(main)
    if kind in ("tridiag", "bidiag_lower"):
        a += np.diag(off, -1)
    if kind in ("tridiag", "bidiag_upper"):
        a += np.diag(rng.uniform(-1, 1, n - 1), 1)
    L, D, U = dense_parts(ilu0(_sp(a)))
    assert np.max(np.abs(a - dense_M(L, D, U))) <= 1e-12 * np.abs(a).max()


@pytest.mark.parametrize("variant", ["ilu0", "shifted", "milu", "level", "crout"])
def test_spd_pivots_positive(variant):
    A = diagonal_scale(gen_poisson_jump(5)[0])[0]
    F = {
        "ilu0": ilu0,
        "shifted": lambda A: shifted_ilu0(A, 0.2),
        "milu": lambda A: milu0(A, 0.5),
        "level": lambda A: level_ilu(A, 2),
        "crout": lambda A: crout_ilu(A, 0.01, 5),
    }[variant](A)
    assert np.all(F.D > 0)


# -- shifted ILU(0) -------------------------------------------------------

@pytest.mark.parametrize("name", sorted(FIXTURES))
def test_shift_zero_is_ilu0_bitwise(name):
    A = FIXTURES[name]()
    assert _bitwise(shifted_ilu0(A, 0.0), ilu0(A))


def test_shift_on_unit_diagonal():
    A = diagonal_scale(lap2d(4))[0]
    shifted = A.to_scipy() + 0.5 * sp.identity(A.n)
    F, G = shifted_ilu0(A, 0.5), ilu0(SparseMatrix.from_scipy(shifted))
    assert np.array_equal(F.D, G.D) and np.array_equal(F.L.values, G.L.values)


def test_shift_2x2():
    F = shifted_ilu0(_sp([[4.0, 1.0], [1.0, 4.0]]), 0.25)
    assert np.allclose(F.D, [5.0, 4.8], rtol=0, atol=1e-15)


# -- MILU(0) --------------------------------------------------------------

@pytest.mark.parametrize("name", sorted(FIXTURES))
def test_milu_omega_zero_is_ilu0_bitwise(name):
    A = FIXTURES[name]()
    assert _bitwise(milu0(A, 0.0), ilu0(A))


def test_milu_poisson8_row_sum():
    A = diagonal_scale(gen_poisson_jump(8)[0])[0]
    F = milu0(A, 1.0)
    e = np.ones(A.n)
    r = A.to_scipy() @ e - F.preconditioner_matrix() @ e
    assert np.max(np.abs(r)) <= 1e-10 * A.norm_inf()


@pytest.mark.parametrize("name", sorted(FIXTURES))
def test_milu_row_sum_identity_all_fixtures(name):
    A = FIXTURES[name]()
    L, D, U = dense_parts(milu0(A, 1.0))
    r = (A.to_dense() - dense_M(L, D, U)) @ np.ones(A.n)
    assert np.max(np.abs(r)) <= 1e-10 * A.norm_inf()


def test_milu_half_matches_dense_oracle():
    A = lap2d(3)
    a = A.to_dense()
    L, D, U = dense_parts(milu0(A, 0.5))
    Lr, Dr, Ur = dense_ilu_pattern(a, a != 0, omega=0.5)
    assert np.max(np.abs(D - Dr)) <= 1e-12
    assert np.max(np.abs(L - Lr)) <= 1e-12 and np.max(np.abs(U - Ur)) <= 1e-12


@pytest.mark.parametrize("omega", [-0.5, 0.3, 1.1])
def test_milu_matches_dense_oracle_random(rng, omega):
    a = random_sparse(30, 0.12, rng)
    L, D, U = dense_parts(milu0(_sp(a), omega))
    Lr, Dr, Ur = dense_ilu_pattern(a, a != 0, omega=omega)
    assert np.allclose(D, Dr, rtol=1e-12, atol=1e-14)
    assert np.allclose(L, Lr, rtol=1e-12, atol=1e-14)


# -- ILU(p) ---------------------------------------------------------------

@pytest.mark.parametrize("name", sorted(FIXTURES))
def test_level_zero_is_ilu0_bitwise(name):
    A = FIXTURES[name]()
    assert _bitwise(level_ilu(A, 0), ilu0(A))


def test_level_full_is_complete_lu(rng):
    a = random_sparse(10, 0.3, rng, dominant=False)
    F = level_ilu(_sp(a), 10)
    L, D, U = dense_parts(F)
    assert np.max(np.abs(a - dense_M(L, D, U))) <= 1e-11 * np.abs(a).sum(axis=1).max()
    Lr, Dr, Ur = dense_lu(a)
    assert np.allclose(D, Dr, rtol=1e-10)


@pytest.mark.parametrize("p", [1, 2, 3])
def test_level_pattern_matches_dense_oracle(p):
    A = lap2d(5)
    a = A.to_dense()
    ptr, idx, lev = level_pattern(A, p)
    got = np.zeros_like(a, dtype=bool)
    got_lev = np.full(a.shape, np.inf)
    for i in range(A.n):
        got[i, idx[ptr[i]:ptr[i + 1]]] = True
        got_lev[i, idx[ptr[i]:ptr[i + 1]]] = lev[ptr[i]:ptr[i + 1]]
    ref = dense_levels(a, p)
    assert np.array_equal(got, ref <= p)
    assert np.array_equal(got_lev[got], ref[got])
    base = (a != 0)
    assert np.all(got[base]) and got.sum() > base.sum()  # strictly contains pattern(A)


@given(st.integers(3, 18), st.integers(0, 3), st.integers(0, 2**31 - 1))
def test_level_pattern_property(n, p, seed):
    rng = np.random.default_rng(seed)
    a = random_sparse(n, 0.2, rng)
    ptr, idx, _ = level_pattern(_sp(a), p)
    got = np.zeros((n, n), dtype=bool)
    for i in range(n):
        got[i, idx[ptr[i]:ptr[i + 1]]] = True
    assert np.array_equal(got, dense_levels(a, p) <= p)


def test_level_values_match_pattern_oracle():
    A = lap2d(5)
    a = A.to_dense()
    pat = dense_levels(a, 2) <= 2
    L, D, U = dense_parts(level_ilu(A, 2))
    Lr, Dr, Ur = dense_ilu_pattern(a, pat)
    assert np.allclose(D, Dr, rtol=1e-13) and np.allclose(L, Lr, atol=1e-14)


def test_level_budget_resource_error():
    with pytest.raises(ResourceLimitError):
        level_ilu(lap2d(8), 5, max_nnz=300)


# -- Crout ILU ------------------------------------------------------------

def test_crout_complete_lu_15x15(rng):
    for _ in range(5):
        a = random_sparse(15, 0.3, rng)
        L, D, U = dense_parts(crout_ilu(_sp(a), 0.0, math.inf))
        assert np.max(np.abs(a - dense_M(L, D, U))) <= 1e-10 * np.abs(a).sum(axis=1).max()


def test_crout_tol_one_drops_everything(rng):
    a = random_sparse(15, 0.3, rng)
    F = crout_ilu(_sp(a), 1.0, math.inf)
    assert F.L.nnz == 0 and F.U.nnz == 0
    assert np.array_equal(F.D, np.diag(a))


def test_crout_fill_cap_and_dense_oracle():
    A = lap2d(6)
    a = A.to_dense()
    cap = crout_fill_cap(A, 5)
    assert cap == math.ceil(A.nnz / (2 * A.n) * 5)
    F = crout_ilu(A, 0.01, 5)
    L, D, U = dense_parts(F)
    assert np.max((L != 0).sum(axis=0)) <= cap
    assert np.max((U != 0).sum(axis=1)) <= cap
    Lr, Dr, Ur = dense_crout(a, 0.01, cap)
    assert np.array_equal(L != 0, Lr != 0) and np.array_equal(U != 0, Ur != 0)
    assert np.allclose(D, Dr, rtol=1e-12)
    assert np.allclose(L, Lr, rtol=1e-12, atol=1e-15)
    assert np.allclose(U, Ur, rtol=1e-12, atol=1e-15)


@given(st.integers(4, 16), st.sampled_from([0.0, 0.01, 0.05, 0.2]),
       st.sampled_from([1.0, 2.0, 5.0, math.inf]), st.integers(0, 2**31 - 1))
def test_crout_matches_dense_oracle_property(n, tol, m, seed):
    rng = np.random.default_rng(seed)
    a = random_sparse(n, 0.3, rng)
    A = _sp(a)
    L, D, U = dense_parts(crout_ilu(A, tol, m))
    Lr, Dr, Ur = dense_crout(a, tol, crout_fill_cap(A, m))
    assert np.array_equal(L != 0, Lr != 0) and np.array_equal(U != 0, Ur != 0)
    assert np.allclose(D, Dr, rtol=1e-11)
    assert np.allclose(L, Lr, rtol=1e-11, atol=1e-13)


def test_crout_symmetric_input_gives_symmetric_factors():
    A = diagonal_scale(gen_poisson_jump(4)[0])[0]
    F = crout_ilu(A, 0.02, 3)
    assert np.allclose(F.L.to_dense(), F.U.to_dense().T, rtol=1e-13, atol=1e-15)


# -- config / dispatch ----------------------------------------------------

def test_factorize_dispatch():
    A = lap2d(4)
    assert _bitwise(factorize(A, FactorizationConfig("milu0", omega=0.0)), ilu0(A))
    assert factorize(A, FactorizationConfig("crout_ilu", tol=0.1, fill_ratio_m=2)).variant == "crout_ilu"
    assert factorize(A, FactorizationConfig("level_ilu", level_p=1)).params == {"p": 1}


@pytest.mark.parametrize("kw", [
    {"variant": "ilut"}, {"alpha": math.nan}, {"omega": math.inf}, {"level_p": -1},
    {"level_p": 1.5}, {"tol": -0.1}, {"fill_ratio_m": 0.5},
])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        FactorizationConfig(**kw)
