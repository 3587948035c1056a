"""CSR storage and the handful of kernels every other module leans on.

Matrices are immutable once built: the index/value arrays are flagged
read-only, so a :class:`SparseMatrix` can be shared between threads.
Hot loops are numba kernels taking the raw arrays; the public wrappers
validate shapes and then dispatch.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numba
import numpy as np
import scipy.io
import scipy.sparse as sp

from .errors import (
    BreakdownError,
    MatrixMarketError,
    UnsupportedFormatError,
    ZeroDiagonalError,
)

__all__ = [
    "SparseMatrix",
    "ScalingRecord",
    "matvec",
    "lower_solve",
    "upper_solve",
    "diagonal_scale",
    "read_matrix_market",
    "write_matrix_market",
    "build_rhs_ones",
]


def _frozen(a, dtype):
    a = np.asarray(a, dtype=dtype)
    if a.flags.writeable or not a.flags.c_contiguous:
        a = np.array(a, dtype=dtype, order="C")
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class SparseMatrix:
    """Square matrix in compressed sparse row form.

    Column indices are strictly ascending inside each row and duplicates are
    not allowed.  ``symmetric`` is computed from the data when not given.
    """

    n: int
    row_ptr: np.ndarray
    col_idx: np.ndarray
    values: np.ndarray
    symmetric: bool | None = None
    _scipy: sp.csr_matrix | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        n = int(self.n)
        row_ptr = _frozen(self.row_ptr, np.int64)
        col_idx = _frozen(self.col_idx, np.int64)
        values = _frozen(self.values, np.float64)
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "row_ptr", row_ptr)
        object.__setattr__(self, "col_idx", col_idx)
        object.__setattr__(self, "values", values)

        if n < 0 or row_ptr.shape != (n + 1,):
            raise ValueError(f"row_ptr must have length n+1={n + 1}, got {row_ptr.shape}")
        if row_ptr[0] != 0 or np.any(np.diff(row_ptr) < 0):
            raise ValueError("row_ptr must start at 0 and be nondecreasing")
        nnz = int(row_ptr[-1])
        if col_idx.shape != (nnz,) or values.shape != (nnz,):
            raise ValueError("col_idx/values length must equal row_ptr[n]")
        if nnz and (col_idx.min() < 0 or col_idx.max() >= n):
            raise ValueError("column index out of range")
        if nnz > 1:
            steps = np.diff(col_idx)
            starts = np.zeros(nnz - 1, dtype=bool)
            inner = row_ptr[1:-1]
            inner = inner[(inner > 0) & (inner < nnz)]
            starts[inner - 1] = True
            if np.any((steps <= 0) & ~starts):
                raise ValueError("column indices must be strictly ascending within each row")
        if self.symmetric is None:
            object.__setattr__(self, "symmetric", self._detect_symmetry())

    # -- construction -----------------------------------------------------

    @classmethod
    def from_scipy(cls, A, symmetric=None):
        A = sp.csr_matrix(A, dtype=np.float64)
        if A.shape[0] != A.shape[1]:
            raise ValueError(f"matrix must be square, got {A.shape}")
        A.sum_duplicates()
        A.sort_indices()
        return cls(A.shape[0], A.indptr, A.indices, A.data, symmetric)

    @classmethod
    def from_dense(cls, a, symmetric=None):
        """Keep every nonzero of ``a`` (zeros are not stored)."""
        return cls.from_scipy(sp.csr_matrix(np.asarray(a, dtype=np.float64)), symmetric)

    @classmethod
    def from_coo(cls, n, rows, cols, vals, symmetric=None):
        """Duplicates are summed; explicit zeros are kept."""
        A = sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()
        return cls.from_scipy(A, symmetric)

    @classmethod
    def identity(cls, n):
        ar = np.arange(n)
        return cls(n, np.arange(n + 1), ar, np.ones(n), True)

    # -- views ------------------------------------------------------------

    @property
    def nnz(self):
        return int(self.row_ptr[-1])

    @property
    def shape(self):
        return (self.n, self.n)

    def to_scipy(self):
        """Shared, cached scipy view; do not mutate it."""
        if self._scipy is None:
            A = sp.csr_matrix((self.values, self.col_idx, self.row_ptr), shape=self.shape)
            A.has_sorted_indices = True
            object.__setattr__(self, "_scipy", A)
        return self._scipy

    def to_dense(self):
        return self.to_scipy().toarray()

    def row_indices(self):
        return np.repeat(np.arange(self.n, dtype=np.int64), np.diff(self.row_ptr))

    def diagonal(self):
        """Dense diagonal; missing diagonal entries read as 0."""
        return _diagonal(self.n, self.row_ptr, self.col_idx, self.values)

    @property
    def zero_diagonal_rows(self):
        """Rows whose diagonal entry is absent or exactly zero."""
        return np.flatnonzero(self.diagonal() == 0.0)

    def row_sums(self):
        return _row_sums(self.n, self.row_ptr, self.values)

    def norm_inf(self):
        if self.nnz == 0:
            return 0.0
        return float(_row_sums(self.n, self.row_ptr, np.abs(self.values)).max())

    def same_pattern(self, other):
        return (
            self.n == other.n
            and np.array_equal(self.row_ptr, other.row_ptr)
            and np.array_equal(self.col_idx, other.col_idx)
        )

    def with_values(self, values, symmetric=None):
        """Same pattern, new values."""
        return SparseMatrix(self.n, self.row_ptr, self.col_idx, values, symmetric)

    def _detect_symmetry(self):
        if self.n == 0:
            return True
        A = self.to_scipy()
        diff = A - A.T
        if diff.nnz == 0:
            return True
        return bool(np.all(diff.data == 0.0))

    def __repr__(self):
        kind = "symmetric" if self.symmetric else "general"
        return f"SparseMatrix(n={self.n}, nnz={self.nnz}, {kind})"


# -- kernels --------------------------------------------------------------

@numba.njit(cache=True, nogil=True)
def _diagonal(n, row_ptr, col_idx, values):
    d = np.zeros(n)
    for i in range(n):
        for q in range(row_ptr[i], row_ptr[i + 1]):
            if col_idx[q] == i:
                d[i] = values[q]
                break
    return d


@numba.njit(cache=True, nogil=True)
def _row_sums(n, row_ptr, values):
    s = np.zeros(n)
    for i in range(n):
        acc = 0.0
        for q in range(row_ptr[i], row_ptr[i + 1]):
            acc += values[q]
        s[i] = acc
    return s


@numba.njit(cache=True, nogil=True)
def _matvec(n, row_ptr, col_idx, values, x, out):
    for i in range(n):
        acc = 0.0
        for q in range(row_ptr[i], row_ptr[i + 1]):
            acc += values[q] * x[col_idx[q]]
        out[i] = acc
    return out


@numba.njit(cache=True, nogil=True)
def _forward(n, row_ptr, col_idx, values, d, b, out):
    # (L + D) y = b, L strictly lower
    for i in range(n):
        acc = b[i]
        for q in range(row_ptr[i], row_ptr[i + 1]):
            acc -= values[q] * out[col_idx[q]]
        out[i] = acc / d[i]
    return out


@numba.njit(cache=True, nogil=True)
def _backward(n, row_ptr, col_idx, values, d, b, out):
    # (D + U) y = b, U strictly upper
    for i in range(n - 1, -1, -1):
        acc = b[i]
        for q in range(row_ptr[i], row_ptr[i + 1]):
            acc -= values[q] * out[col_idx[q]]
        out[i] = acc / d[i]
    return out


# -- public kernels -------------------------------------------------------

def _vector(x, n, name="x"):
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (n,):
        raise ValueError(f"{name} has shape {x.shape}, expected ({n},)")
    return x


def matvec(A, x):
    """y = A x."""
    x = _vector(x, A.n)
    return _matvec(A.n, A.row_ptr, A.col_idx, A.values, x, np.empty(A.n))


def _check_pivots(D, n):
    D = _vector(D, n, "D")
    zero = np.flatnonzero(D == 0.0)
    if zero.size:
        raise BreakdownError(f"zero diagonal entry in row {zero[0]}", row=int(zero[0]))
    return D


def _check_triangle(T, lower):
    r = T.row_indices()
    ok = np.all(T.col_idx < r) if lower else np.all(T.col_idx > r)
    if not ok:
        raise ValueError(f"matrix is not strictly {'lower' if lower else 'upper'} triangular")


def lower_solve(L, D, b):
    """Forward substitution for (L + D) y = b with L strictly lower."""
    _check_triangle(L, lower=True)
    D = _check_pivots(D, L.n)
    b = _vector(b, L.n, "b")
    return _forward(L.n, L.row_ptr, L.col_idx, L.values, D, b, np.empty(L.n))


def upper_solve(U, D, b):
    """Backward substitution for (D + U) y = b with U strictly upper."""
    _check_triangle(U, lower=False)
    D = _check_pivots(D, U.n)
    b = _vector(b, U.n, "b")
    return _backward(U.n, U.row_ptr, U.col_idx, U.values, D, b, np.empty(U.n))


def build_rhs_ones(A):
    """b = A e, so that the exact solution is the all-ones vector."""
    return matvec(A, np.ones(A.n))


# -- scaling --------------------------------------------------------------

@dataclass(frozen=True)
class ScalingRecord:
    """Symmetric diagonal scaling S = diag(d_scale) with A_hat = S A S.

    A x = b is equivalent to A_hat y = S b with x = S y.
    """

    d_scale: np.ndarray
    applied: bool = True

    def scale_rhs(self, b):
        return self.d_scale * b if self.applied else np.array(b, dtype=np.float64)

    def unscale_solution(self, y):
        return self.d_scale * y if self.applied else np.array(y, dtype=np.float64)

    @classmethod
    def identity(cls, n):
        return cls(np.ones(n), applied=False)


def diagonal_scale(A):
    """Return (S A S, record) with S = diag(1/sqrt|a_ii|).

    The scaled diagonal is set to sign(a_ii) exactly, so a matrix with a
    positive diagonal comes out with an exact unit diagonal.
    """
    diag = A.diagonal()
    zero = np.flatnonzero(diag == 0.0)
    if zero.size:
        raise ZeroDiagonalError(
            f"{zero.size} zero diagonal entries (first in row {zero[0]})", rows=zero
        )
    s = 1.0 / np.sqrt(np.abs(diag))
    rows = A.row_indices()
    vals = A.values * s[rows] * s[A.col_idx]
    on_diag = rows == A.col_idx
    vals[on_diag] = np.sign(A.values[on_diag])
    return A.with_values(vals, A.symmetric), ScalingRecord(s, applied=True)


# -- Matrix Market --------------------------------------------------------

def read_matrix_market(path):
    """Read a coordinate, real (or integer) Matrix Market file.

    Symmetric files are expanded to full storage and duplicate entries are
    summed.  Matrices with zero diagonals load fine; check
    ``zero_diagonal_rows`` before scaling.
    """
    path = Path(path)
    try:
        rows, cols, _, fmt, field_, symmetry = scipy.io.mminfo(str(path))
    except (ValueError, IndexError) as exc:
        raise MatrixMarketError(f"{path}: {exc}") from exc
    if fmt != "coordinate":
        raise UnsupportedFormatError(f"{path}: '{fmt}' format is not supported")
    if field_ not in ("real", "integer"):
        raise UnsupportedFormatError(f"{path}: '{field_}' field is not supported")
    if symmetry not in ("general", "symmetric"):
        raise UnsupportedFormatError(f"{path}: '{symmetry}' symmetry is not supported")
    if rows != cols:
        raise MatrixMarketError(f"{path}: matrix is not square ({rows}x{cols})")
    try:
        A = scipy.io.mmread(str(path))
    except (ValueError, IndexError) as exc:
        raise MatrixMarketError(f"{path}: {exc}") from exc
    return SparseMatrix.from_scipy(A, symmetric=True if symmetry == "symmetric" else None)


def write_matrix_market(path, A, symmetric=False, comment=""):
    """Write ``A`` with 17 significant digits (exact round-trip).

    With ``symmetric=True`` only the lower triangle is stored; the caller
    asserts symmetry.
    """
    if symmetric and not A.symmetric:
        raise ValueError("matrix is not symmetric")
    scipy.io.mmwrite(
        str(path),
        A.to_scipy(),
        comment=comment,
        field="real",
        precision=17,
        symmetry="symmetric" if symmetric else "general",
    )
