"""ILU-family factorizations in DDU form.

Every variant returns a :class:`FactorTriple` (L, D, U) with

    M = (L + D) D^{-1} (D + U),

L strictly lower, U strictly upper, D the pivots.  In this form L holds the
*unnormalized* lower entries (L D^{-1} is the unit lower factor), so for a
symmetric matrix and a symmetric dropping rule L = U^T.

ILU(0), shifted ILU(0), MILU(0) and the numeric phase of ILU(p) share one
pattern-restricted IKJ kernel, which is what makes the degenerate-parameter
cases (alpha=0, omega=0, p=0) reproduce ILU(0) bit for bit.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numba
import numpy as np
import scipy.sparse as sp

from .errors import BreakdownError, ResourceLimitError, ZeroDiagonalError
from .sparse import SparseMatrix

__all__ = [
    "PIVOT_THRESHOLD",
    "FactorTriple",
    "FactorizationConfig",
    "ilu0",
    "shifted_ilu0",
    "milu0",
    "level_ilu",
    "level_pattern",
    "crout_ilu",
    "factorize",
    "VARIANTS",
]

PIVOT_THRESHOLD = 1e-300
VARIANTS = ("ilu0", "shifted_ilu0", "milu0", "level_ilu", "crout_ilu")


@dataclass(frozen=True, eq=False)
class FactorTriple:
    L: SparseMatrix
    D: np.ndarray
    U: SparseMatrix
    variant: str = "ilu0"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        D = np.array(self.D, dtype=np.float64)
        D.setflags(write=False)
        object.__setattr__(self, "D", D)

    @property
    def n(self):
        return self.L.n

    @property
    def nnz(self):
        """Stored entries of L + D + U."""
        return self.L.nnz + self.n + self.U.nnz

    def pattern(self):
        """Retained positions as a pattern-only CSR matrix (values are 1)."""
        return SparseMatrix.from_scipy(self._combined(np.ones_like))

    def combined(self):
        """L + D + U as a single matrix."""
        return SparseMatrix.from_scipy(self._combined(lambda v: v))

    def _combined(self, f):
        n = self.n
        L = sp.csr_matrix((f(self.L.values), self.L.col_idx, self.L.row_ptr), shape=(n, n))
        U = sp.csr_matrix((f(self.U.values), self.U.col_idx, self.U.row_ptr), shape=(n, n))
        return (L + sp.diags(f(self.D)) + U).tocsr()

    def preconditioner_matrix(self):
        """M = (L + D) D^-1 (D + U) as scipy CSR (for checks on small cases)."""
        Ls, Us = self.L.to_scipy(), self.U.to_scipy()
        Dm = sp.diags(self.D)
        return ((Ls + Dm) @ sp.diags(1.0 / self.D) @ (Dm + Us)).tocsr()


@dataclass(frozen=True)
class FactorizationConfig:
    """Variant name plus every variant parameter (unused ones are ignored)."""

    variant: str = "ilu0"
    alpha: float = 0.0
    omega: float = 0.0
    level_p: int = 0
    tol: float = 0.0
    fill_ratio_m: float = math.inf
    max_nnz: int | None = None

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}; expected one of {VARIANTS}")
        if not (math.isfinite(self.alpha) and math.isfinite(self.omega)):
            raise ValueError("alpha and omega must be finite")
        if int(self.level_p) != self.level_p or self.level_p < 0:
            raise ValueError("level_p must be a nonnegative integer")
        if not (self.tol >= 0 and math.isfinite(self.tol)):
            raise ValueError("tol must be finite and >= 0")
        if not self.fill_ratio_m >= 1:
            raise ValueError("fill_ratio_m must be >= 1 (or inf)")

    def params(self):
        """The parameters that matter for this variant."""
        return {
            "ilu0": {},
            "shifted_ilu0": {"alpha": self.alpha},
            "milu0": {"omega": self.omega},
            "level_ilu": {"p": int(self.level_p)},
            "crout_ilu": {"tol": self.tol, "m": self.fill_ratio_m},
        }[self.variant]


# -- shared IKJ kernel ----------------------------------------------------

@numba.njit(cache=True, nogil=True)
def _ilu_on_pattern(n, row_ptr, col_idx, values, omega, modified, pivot_tol):
    """Factor in place on a fixed pattern.  Returns (values, diag_pos, bad_row).

    bad_row is -1 on success, otherwise the first row with a tiny pivot.
    With ``modified`` every update that would land outside the pattern is
    scaled by omega and subtracted from the row's diagonal instead.
    """
    v = values.copy()
    diag = np.empty(n, dtype=np.int64)
    for i in range(n):
        diag[i] = -1
        for q in range(row_ptr[i], row_ptr[i + 1]):
            if col_idx[q] == i:
                diag[i] = q
                break
        if diag[i] < 0:
            return v, diag, i
    pos = np.full(n, -1, dtype=np.int64)
    for i in range(n):
        for q in range(row_ptr[i], row_ptr[i + 1]):
            pos[col_idx[q]] = q
        di = diag[i]
        for q in range(row_ptr[i], di):
            k = col_idx[q]
            mult = v[q] / v[diag[k]]
            for r in range(diag[k] + 1, row_ptr[k + 1]):
                p = pos[col_idx[r]]
                if p >= 0:
                    v[p] -= mult * v[r]
                elif modified:
                    v[di] -= omega * (mult * v[r])
        for q in range(row_ptr[i], row_ptr[i + 1]):
            pos[col_idx[q]] = -1
        if not abs(v[di]) >= pivot_tol:
            return v, diag, i
    return v, diag, -1


def _split(n, row_ptr, col_idx, v, diag_pos, variant, params):
    rows = np.repeat(np.arange(n, dtype=np.int64), np.diff(row_ptr))
    lower = col_idx < rows
    upper = col_idx > rows

    def part(mask):
        counts = np.bincount(rows[mask], minlength=n)
        ptr = np.concatenate(([0], np.cumsum(counts)))
        return SparseMatrix(n, ptr, col_idx[mask], v[mask], symmetric=False)

    return FactorTriple(part(lower), v[diag_pos], part(upper), variant, params)


def _factor_pattern(n, row_ptr, col_idx, values, omega, modified, variant, params):
    v, diag_pos, bad = _ilu_on_pattern(
        n, row_ptr, col_idx, values, float(omega), bool(modified), PIVOT_THRESHOLD
    )
    if bad >= 0:
        if diag_pos[bad] < 0:
            raise ZeroDiagonalError(f"row {bad} has no diagonal entry", rows=[bad])
        raise BreakdownError(
            f"{variant}: pivot {v[diag_pos[bad]]!r} in row {bad} is below {PIVOT_THRESHOLD}",
            row=int(bad),
        )
    return _split(n, row_ptr, col_idx, v, diag_pos, variant, params)


# -- ILU(0) family --------------------------------------------------------

def ilu0(A):
    """ILU(0): IKJ elimination restricted to the pattern of ``A``."""
    return _factor_pattern(A.n, A.row_ptr, A.col_idx, A.values, 0.0, False, "ilu0", {})


def shifted_ilu0(A, alpha):
    """ILU(0) of A + alpha * diag(A).

    The factors approximate the shifted matrix; solvers still iterate on A.
    """
    rows = A.row_indices()
    vals = A.values.copy()
    on_diag = rows == A.col_idx
    vals[on_diag] = vals[on_diag] + alpha * vals[on_diag]
    return _factor_pattern(
        A.n, A.row_ptr, A.col_idx, vals, 0.0, False, "shifted_ilu0", {"alpha": alpha}
    )


def milu0(A, omega):
    """Modified ILU(0): discarded fill times omega is moved onto the diagonal.

    omega = 1 preserves row sums, (A - M) e = 0.
    """
    return _factor_pattern(
        A.n, A.row_ptr, A.col_idx, A.values, omega, omega != 0.0, "milu0", {"omega": omega}
    )


# -- ILU(p) ---------------------------------------------------------------

@numba.njit(cache=True, nogil=True)
def _symbolic_levels(n, row_ptr, col_idx, p, capacity):
    """Row-wise level-of-fill symbolic factorization.

    Returns (out_ptr, out_idx, out_lev, status); status is -1 on success or
    the row at which ``capacity`` ran out.
    """
    INF = np.iinfo(np.int64).max // 4
    out_ptr = np.zeros(n + 1, dtype=np.int64)
    out_idx = np.empty(capacity, dtype=np.int64)
    out_lev = np.empty(capacity, dtype=np.int64)
    diag = np.empty(n, dtype=np.int64)
    lev = np.full(n, INF, dtype=np.int64)
    nxt = np.full(n + 1, -1, dtype=np.int64)
    HEAD = n
    nnz = 0
    for i in range(n):
        # sorted linked list of the row's columns, head sentinel at index n
        nxt[HEAD] = -1
        prev = HEAD
        has_diag = False
        for q in range(row_ptr[i], row_ptr[i + 1]):
            j = col_idx[q]
            lev[j] = 0
            nxt[prev] = j
            nxt[j] = -1
            prev = j
            if j == i:
                has_diag = True
        if not has_diag:
            # insert the diagonal so the numeric phase sees it; it is 0 there
            prev = HEAD
            while nxt[prev] != -1 and nxt[prev] < i:
                prev = nxt[prev]
            nxt[i] = nxt[prev]
            nxt[prev] = i
            lev[i] = 0
        k = nxt[HEAD]
        while k != -1 and k < i:
            lk = lev[k]
            if lk <= p:
                cur = k
                for r in range(diag[k] + 1, out_ptr[k + 1]):
                    j = out_idx[r]
                    newlev = lk + out_lev[r] + 1
                    if newlev > p:
                        continue
                    if lev[j] == INF:
                        # insert j after cur keeping order; j > k so search from k
                        while nxt[cur] != -1 and nxt[cur] < j:
                            cur = nxt[cur]
                        nxt[j] = nxt[cur]
                        nxt[cur] = j
                        lev[j] = newlev
                        cur = j
                    elif newlev < lev[j]:
                        lev[j] = newlev
            k = nxt[k]
        j = nxt[HEAD]
        while j != -1:
            if lev[j] <= p:
                if nnz >= capacity:
                    return out_ptr, out_idx, out_lev, i
                if j == i:
                    diag[i] = nnz
                out_idx[nnz] = j
                out_lev[nnz] = lev[j]
                nnz += 1
            lev[j] = INF
            j = nxt[j]
        out_ptr[i + 1] = nnz
    return out_ptr, out_idx[:nnz], out_lev[:nnz], -1


@numba.njit(cache=True, nogil=True)
def _scatter_values(n, a_ptr, a_idx, a_val, p_ptr, p_idx):
    out = np.zeros(p_idx.shape[0])
    for i in range(n):
        q = p_ptr[i]
        for r in range(a_ptr[i], a_ptr[i + 1]):
            while p_idx[q] != a_idx[r]:
                q += 1
            out[q] = a_val[r]
    return out


def _default_budget(A):
    return 20 * A.nnz + A.n


def level_pattern(A, p, max_nnz=None):
    """Symbolic phase of ILU(p): CSR pattern with lev <= p, plus the levels.

    Levels start at 0 on the pattern of A (and the diagonal) and are relaxed
    with lev_ij = min(lev_ij, lev_ik + lev_kj + 1).
    """
    if p < 0 or int(p) != p:
        raise ValueError("p must be a nonnegative integer")
    budget = _default_budget(A) if max_nnz is None else int(max_nnz)
    ptr, idx, lev, status = _symbolic_levels(A.n, A.row_ptr, A.col_idx, int(p), budget)
    if status >= 0:
        raise ResourceLimitError(
            f"level_ilu(p={p}) pattern exceeds the budget of {budget} entries (row {status})"
        )
    return ptr, idx.copy(), lev.copy()


def level_ilu(A, p, max_nnz=None):
    """ILU(p): fill-in allowed up to level ``p``.  p=0 reproduces ILU(0)."""
    ptr, idx, _ = level_pattern(A, p, max_nnz)
    vals = _scatter_values(A.n, A.row_ptr, A.col_idx, A.values, ptr, idx)
    return _factor_pattern(A.n, ptr, idx, vals, 0.0, False, "level_ilu", {"p": int(p)})


# -- Crout ILU ------------------------------------------------------------

@numba.njit(cache=True, nogil=True)
def _select(cand, work, limit, cap):
    """Keep entries with |work| > limit, then the ``cap`` largest; sorted by index."""
    m = 0
    for t in range(cand.shape[0]):
        if abs(work[cand[t]]) > limit:
            cand[m] = cand[t]
            m += 1
    kept = np.sort(cand[:m])
    if m > cap:
        mags = np.empty(m)
        for t in range(m):
            mags[t] = -abs(work[kept[t]])
        order = np.argsort(mags, kind="mergesort")
        kept = np.sort(kept[order[:cap]])
    return kept


@numba.njit(cache=True, nogil=True)
def _crout(n, a_ptr, a_idx, a_val, c_ptr, c_idx, c_val,
           row_norm, col_norm, tol, cap, capacity, pivot_tol):
    D = np.zeros(n)
    # U by rows (CSR, appended row by row) + per-column linked lists
    u_ptr = np.zeros(n + 1, dtype=np.int64)
    u_idx = np.empty(capacity, dtype=np.int64)
    u_val = np.empty(capacity)
    u_row = np.empty(capacity, dtype=np.int64)
    u_next = np.empty(capacity, dtype=np.int64)
    u_head = np.full(n, -1, dtype=np.int64)
    u_tail = np.full(n, -1, dtype=np.int64)
    # L by columns (CSC, appended column by column) + per-row linked lists
    l_ptr = np.zeros(n + 1, dtype=np.int64)
    l_idx = np.empty(capacity, dtype=np.int64)
    l_val = np.empty(capacity)
    l_col = np.empty(capacity, dtype=np.int64)
    l_next = np.empty(capacity, dtype=np.int64)
    l_head = np.full(n, -1, dtype=np.int64)
    l_tail = np.full(n, -1, dtype=np.int64)

    z = np.zeros(n)
    w = np.zeros(n)
    zmark = np.zeros(n, dtype=np.bool_)
    wmark = np.zeros(n, dtype=np.bool_)
    zlist = np.empty(n, dtype=np.int64)
    wlist = np.empty(n, dtype=np.int64)
    nu = 0
    nl = 0
    for k in range(n):
        # row k of U (and the pivot): a_kj - sum_i L_ki / d_i * U_ij, j >= k
        nz = 0
        for q in range(a_ptr[k], a_ptr[k + 1]):
            j = a_idx[q]
            if j >= k:
                z[j] = a_val[q]
                zmark[j] = True
                zlist[nz] = j
                nz += 1
        pos = l_head[k]
        while pos != -1:
            i = l_col[pos]
            mult = l_val[pos] / D[i]
            for q in range(u_ptr[i], u_ptr[i + 1]):
                j = u_idx[q]
                if j >= k:
                    if not zmark[j]:
                        zmark[j] = True
                        z[j] = 0.0
                        zlist[nz] = j
                        nz += 1
                    z[j] -= mult * u_val[q]
            pos = l_next[pos]
        dk = z[k] if zmark[k] else 0.0
        # column k of L: a_rk - sum_i L_ri / d_i * U_ik, r > k
        nw = 0
        for q in range(c_ptr[k], c_ptr[k + 1]):
            r = c_idx[q]
            if r > k:
                w[r] = c_val[q]
                wmark[r] = True
                wlist[nw] = r
                nw += 1
        pos = u_head[k]
        while pos != -1:
            i = u_row[pos]
            mult = u_val[pos] / D[i]
            for q in range(l_ptr[i], l_ptr[i + 1]):
                r = l_idx[q]
                if r > k:
                    if not wmark[r]:
                        wmark[r] = True
                        w[r] = 0.0
                        wlist[nw] = r
                        nw += 1
                    w[r] -= l_val[q] * mult
            pos = u_next[pos]

        if not abs(dk) >= pivot_tol:
            return D, u_ptr, u_idx, u_val, l_ptr, l_idx, l_val, k, 0
        D[k] = dk

        zc = np.empty(nz, dtype=np.int64)
        m = 0
        for t in range(nz):
            if zlist[t] > k:
                zc[m] = zlist[t]
                m += 1
        keep_u = _select(zc[:m], z, tol * row_norm[k], cap)
        keep_l = _select(wlist[:nw].copy(), w, tol * col_norm[k], cap)
        if nu + keep_u.shape[0] > capacity or nl + keep_l.shape[0] > capacity:
            return D, u_ptr, u_idx, u_val, l_ptr, l_idx, l_val, k, 1

        for t in range(keep_u.shape[0]):
            j = keep_u[t]
            u_idx[nu] = j
            u_val[nu] = z[j]
            u_row[nu] = k
            u_next[nu] = -1
            if u_head[j] == -1:
                u_head[j] = nu
            else:
                u_next[u_tail[j]] = nu
            u_tail[j] = nu
            nu += 1
        u_ptr[k + 1] = nu
        for t in range(keep_l.shape[0]):
            r = keep_l[t]
            l_idx[nl] = r
            l_val[nl] = w[r]
            l_col[nl] = k
            l_next[nl] = -1
            if l_head[r] == -1:
                l_head[r] = nl
            else:
                l_next[l_tail[r]] = nl
            l_tail[r] = nl
            nl += 1
        l_ptr[k + 1] = nl

        for t in range(nz):
            zmark[zlist[t]] = False
        for t in range(nw):
            wmark[wlist[t]] = False
    return D, u_ptr, u_idx[:nu], u_val[:nu], l_ptr, l_idx[:nl], l_val[:nl], -1, 0


def crout_fill_cap(A, fill_ratio_m):
    """Per-column (L) / per-row (U) entry limit: ceil(nnz / (2 n) * m)."""
    if math.isinf(fill_ratio_m):
        return max(A.n - 1, 0)
    return min(max(A.n - 1, 0), math.ceil(A.nnz / (2 * A.n) * fill_ratio_m))


def crout_ilu(A, tol, fill_ratio_m=math.inf, max_nnz=None):
    """Crout ILU with a norm-relative drop tolerance and a fill cap.

    At step k, entries of row k of U (resp. column k of L) whose magnitude
    is at most ``tol`` times the 2-norm of the strictly upper part of row k
    (resp. strictly lower part of column k) of A are dropped; of the
    survivors only the ``crout_fill_cap`` largest are kept.  tol=0 with
    m=inf gives the complete LU factorization.
    """
    if tol < 0:
        raise ValueError("tol must be >= 0")
    n = A.n
    cap = crout_fill_cap(A, fill_ratio_m)
    # sum_k min(cap, n-1-k): the most entries L (or U) can ever hold
    need = cap * (cap - 1) // 2 + (n - cap) * cap
    budget = _default_budget(A) if max_nnz is None else int(max_nnz)
    capacity = min(need, budget)

    As = A.to_scipy()
    Ac = As.tocsc()
    Ac.sort_indices()
    rows = A.row_indices()
    upper = A.col_idx > rows
    row_norm = np.sqrt(np.bincount(rows[upper], A.values[upper] ** 2, minlength=n))
    lower = A.col_idx < rows
    col_norm = np.sqrt(np.bincount(A.col_idx[lower], A.values[lower] ** 2, minlength=n))

    D, u_ptr, u_idx, u_val, l_ptr, l_idx, l_val, bad, kind = _crout(
        n, A.row_ptr, A.col_idx, A.values,
        Ac.indptr.astype(np.int64), Ac.indices.astype(np.int64), Ac.data,
        row_norm, col_norm, float(tol), int(cap), int(max(capacity, 1)), PIVOT_THRESHOLD,
    )
    if bad >= 0:
        if kind == 1:
            raise ResourceLimitError(
                f"crout_ilu fill exceeds the budget of {capacity} entries (step {bad})"
            )
        raise BreakdownError(f"crout_ilu: tiny pivot at row {bad}", row=int(bad))
    U = SparseMatrix(n, u_ptr, u_idx, u_val, symmetric=False)
    Lc = sp.csc_matrix((l_val, l_idx, l_ptr), shape=(n, n)).tocsr()
    Lc.sort_indices()
    L = SparseMatrix(n, Lc.indptr, Lc.indices, Lc.data, symmetric=False)
    return FactorTriple(L, D, U, "crout_ilu", {"tol": tol, "m": fill_ratio_m})


# -- dispatch -------------------------------------------------------------

def factorize(A, config):
    """Run the variant named in ``config`` on ``A``."""
    v = config.variant
    if v == "ilu0":
        return ilu0(A)
    if v == "shifted_ilu0":
        return shifted_ilu0(A, config.alpha)
    if v == "milu0":
        return milu0(A, config.omega)
    if v == "level_ilu":
        return level_ilu(A, int(config.level_p), config.max_nnz)
    return crout_ilu(A, config.tol, config.fill_ratio_m, config.max_nnz)
