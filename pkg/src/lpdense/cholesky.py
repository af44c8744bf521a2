"""Simplicial sparse Cholesky with small-pivot regularization.

The factorization computes ``L L^T = P M P^T + F F^T`` where ``F`` collects
one scaled canonical vector per pivot that was judged too small.  A pivot
``d_i`` (the diagonal entry after ``i`` elimination steps) is small when::

    d_i <= tol * max_j M_jj**2

and the diagonal is then raised by ``max_j M_jj``, so the matching column
of ``F`` is ``sqrt(max_j M_jj) * e_i``.  The factorization therefore always
completes.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numba
import numpy as np
import scipy.sparse as sp

from .errors import DimensionError, IndefiniteMatrixError
from .sparse import INDEX, Permutation, SparseMatrix, symmetric_from_lower

DEFAULT_PIVOT_TOL = 1e-30
DEFAULT_INDEFINITE_TOL = 1e-10


# ---------------------------------------------------------------------------
# kernels


@numba.njit(cache=True)
def _etree(n, up_ptr, up_idx):
    # Liu's algorithm with path compression; columns hold rows i < k
    parent = np.full(n, -1, dtype=np.int64)
    ancestor = np.full(n, -1, dtype=np.int64)
    for k in range(n):
        for p in range(up_ptr[k], up_ptr[k + 1]):
            i = up_idx[p]
            while i != -1 and i < k:
                nxt = ancestor[i]
                ancestor[i] = k
                if nxt == -1:
                    parent[i] = k
                i = nxt
    return parent


@numba.njit(cache=True)
def _row_patterns(n, up_ptr, up_idx, parent):
    # two passes over the row subtrees: count, then fill
    mark = np.full(n, -1, dtype=np.int64)
    counts = np.zeros(n, dtype=np.int64)
    for k in range(n):
        mark[k] = k
        for p in range(up_ptr[k], up_ptr[k + 1]):
            i = up_idx[p]
            while i != -1 and mark[i] != k:
                counts[k] += 1
                mark[i] = k
                i = parent[i]
    row_ptr = np.zeros(n + 1, dtype=np.int64)
    for k in range(n):
        row_ptr[k + 1] = row_ptr[k] + counts[k]
    row_idx = np.empty(row_ptr[n], dtype=np.int64)
    mark[:] = -1
    for k in range(n):
        mark[k] = k
        pos = row_ptr[k]
        for p in range(up_ptr[k], up_ptr[k + 1]):
            i = up_idx[p]
            while i != -1 and mark[i] != k:
                row_idx[pos] = i
                pos += 1
                mark[i] = k
                i = parent[i]
    return row_ptr, row_idx


@numba.njit(cache=True)
def _column_pattern(n, row_ptr, row_idx):
    # transpose the strict row patterns into columns with the diagonal first
    counts = np.ones(n, dtype=np.int64)
    for k in range(n):
        for p in range(row_ptr[k], row_ptr[k + 1]):
            counts[row_idx[p]] += 1
    col_ptr = np.zeros(n + 1, dtype=np.int64)
    for j in range(n):
        col_ptr[j + 1] = col_ptr[j] + counts[j]
    rows = np.empty(col_ptr[n], dtype=np.int64)
    fill = col_ptr[:-1].copy()
    for j in range(n):
        rows[fill[j]] = j
        fill[j] += 1
    for k in range(n):
        for p in range(row_ptr[k], row_ptr[k + 1]):
            j = row_idx[p]
            rows[fill[j]] = k
            fill[j] += 1
    return col_ptr, rows


@numba.njit(cache=True)
def _numeric(n, c_ptr, c_idx, c_val, l_ptr, l_idx, row_ptr, row_idx,
             threshold, shift, neg_limit):
    lx = np.zeros(l_ptr[n], dtype=np.float64)
    x = np.zeros(n, dtype=np.float64)
    nxt = np.zeros(n, dtype=np.int64)
    shifted = np.zeros(n, dtype=np.bool_)
    for j in range(n):
        for p in range(c_ptr[j], c_ptr[j + 1]):
            x[c_idx[p]] += c_val[p]
        for p in range(row_ptr[j], row_ptr[j + 1]):
            k = row_idx[p]
            q0 = nxt[k]
            ljk = lx[q0]
            for q in range(q0, l_ptr[k + 1]):
                x[l_idx[q]] -= lx[q] * ljk
            nxt[k] = q0 + 1
        d = x[j]
        x[j] = 0.0
        if d <= threshold:
            if d < neg_limit:
                return lx, shifted, j, d
            d += shift
            shifted[j] = True
        ljj = math.sqrt(d)
        start = l_ptr[j]
        lx[start] = ljj
        for q in range(start + 1, l_ptr[j + 1]):
            i = l_idx[q]
            lx[q] = x[i] / ljj
            x[i] = 0.0
        nxt[j] = start + 1
    return lx, shifted, -1, 0.0


@numba.njit(cache=True)
def _lower_solve(n, l_ptr, l_idx, l_val, x):
    # x is (n, p) C-ordered and overwritten with L^{-1} x
    p = x.shape[1]
    for j in range(n):
        start = l_ptr[j]
        piv = l_val[start]
        for c in range(p):
            x[j, c] /= piv
        for q in range(start + 1, l_ptr[j + 1]):
            i = l_idx[q]
            v = l_val[q]
            if v != 0.0:
                for c in range(p):
                    x[i, c] -= v * x[j, c]
    return x


@numba.njit(cache=True)
def _upper_solve(n, l_ptr, l_idx, l_val, x):
    # x is (n, p) C-ordered and overwritten with L^{-T} x
    p = x.shape[1]
    for j in range(n - 1, -1, -1):
        start = l_ptr[j]
        for q in range(start + 1, l_ptr[j + 1]):
            i = l_idx[q]
            v = l_val[q]
            if v != 0.0:
                for c in range(p):
                    x[j, c] -= v * x[i, c]
        piv = l_val[start]
        for c in range(p):
            x[j, c] /= piv
    return x


# ---------------------------------------------------------------------------
# symbolic phase


@dataclass(frozen=True, eq=False)
class SymbolicFactor:
    """Elimination tree and nonzero pattern of ``L`` for a fixed ordering.

    ``L_pattern`` stores each column with the diagonal first and the
    remaining rows increasing.  ``row_ptr``/``row_idx`` hold the strict row
    patterns used by the left-looking numeric phase.
    """

    order: Permutation
    etree: np.ndarray
    col_counts: np.ndarray
    L_pattern: SparseMatrix
    row_ptr: np.ndarray
    row_idx: np.ndarray

    @property
    def n(self) -> int:
        return len(self.order)

    @property
    def nnz(self) -> int:
        return self.L_pattern.nnz


def _permuted_lower(M: SparseMatrix, order: Permutation) -> sp.csc_matrix:
    full = symmetric_from_lower(M) if _is_lower(M) else M.to_scipy()
    perm = order.perm
    low = sp.tril(full[perm][:, perm], format="csc")
    low.sort_indices()
    return low


def _is_lower(M: SparseMatrix) -> bool:
    cols = np.repeat(np.arange(M.ncols), M.col_counts())
    return bool(np.all(M.row_idx >= cols))


def symbolic_factorize(pattern: SparseMatrix, order: Permutation) -> SymbolicFactor:
    """Elimination tree, column counts and ``L`` pattern of ``P A P^T``.

    ``pattern`` may be given as a lower triangle or as the full symmetric
    structure.
    """
    n = pattern.nrows
    if pattern.ncols != n:
        raise DimensionError("symbolic factorization needs a square pattern")
    if len(order) != n:
        raise DimensionError("ordering size does not match the pattern")
    ones = SparseMatrix(n, n, pattern.col_ptr, pattern.row_idx, np.ones(pattern.nnz))
    low = _permuted_lower(ones, order)
    up = low.T.tocsc()
    up.sort_indices()
    up_ptr = up.indptr.astype(INDEX)
    up_idx = up.indices.astype(INDEX)
    parent = _etree(n, up_ptr, up_idx)
    row_ptr, row_idx = _row_patterns(n, up_ptr, up_idx, parent)
    col_ptr, rows = _column_pattern(n, row_ptr, row_idx)
    L_pattern = SparseMatrix(n, n, col_ptr, rows, np.ones(rows.size))
    return SymbolicFactor(order, parent, np.diff(col_ptr), L_pattern, row_ptr, row_idx)


# ---------------------------------------------------------------------------
# numeric phase


@dataclass(frozen=True, eq=False)
class RegularizedFactor:
    """Cholesky factor of ``P2 M P2^T + F F^T``.

    ``F_cols`` lists ``(pivot_row, value)`` pairs in permuted coordinates:
    column ``t`` of ``F`` is ``value * e_{pivot_row}``.
    """

    symbolic: SymbolicFactor
    L_values: np.ndarray
    F_cols: tuple
    diag_max_sq: float

    @property
    def P2(self) -> Permutation:
        return self.symbolic.order

    @property
    def n(self) -> int:
        return self.symbolic.n

    @cached_property
    def L(self) -> SparseMatrix:
        pat = self.symbolic.L_pattern
        mat = sp.csc_matrix((self.L_values, pat.row_idx, pat.col_ptr), shape=pat.shape)
        return SparseMatrix.from_scipy(mat)

    def F_dense(self) -> np.ndarray:
        F = np.zeros((self.n, len(self.F_cols)))
        for t, (row, val) in enumerate(self.F_cols):
            F[row, t] = val
        return F

    @property
    def d(self) -> int:
        return len(self.F_cols)


def numeric_factorize(M: SparseMatrix, sym: SymbolicFactor, pivot_rel_tol=DEFAULT_PIVOT_TOL,
                      *, squared=True, indefinite_tol=DEFAULT_INDEFINITE_TOL) -> RegularizedFactor:
    """Factor ``P2 M P2^T + F F^T = L L^T`` on a precomputed pattern.

    Parameters
    ----------
    M : SparseMatrix
        Symmetric positive semidefinite matrix, lower triangle or full
        storage, in the original (unpermuted) ordering.  Its pattern must be
        contained in the one used for ``sym``.
    sym : SymbolicFactor
    pivot_rel_tol : float
        Relative small-pivot tolerance.
    squared : bool
        Compare pivots against ``max_j M_jj**2`` (default) or against
        ``max_j M_jj``.
    indefinite_tol : float
        Pivots below ``-indefinite_tol * max_j M_jj`` raise instead of being
        regularized.

    Raises
    ------
    IndefiniteMatrixError
        If a pivot is negative beyond round-off.
    """
    n = sym.n
    if M.shape != (n, n):
        raise DimensionError("matrix and symbolic factor sizes differ")
    low = _permuted_lower(M, sym.order)
    diag = low.diagonal()
    diag_max = float(diag.max()) if n else 0.0
    scale = diag_max if diag_max > 0 else 1.0
    diag_max_sq = diag_max * diag_max
    threshold = pivot_rel_tol * (diag_max_sq if squared else diag_max)
    pat = sym.L_pattern
    lx, shifted, bad, pivot = _numeric(
        n, low.indptr.astype(INDEX), low.indices.astype(INDEX), low.data.astype(np.float64),
        pat.col_ptr, pat.row_idx, sym.row_ptr, sym.row_idx,
        threshold, scale, -indefinite_tol * scale)
    if bad >= 0:
        raise IndefiniteMatrixError(int(bad), float(pivot))
    fval = math.sqrt(scale)
    F_cols = tuple((int(j), fval) for j in np.flatnonzero(shifted))
    return RegularizedFactor(sym, lx, F_cols, diag_max_sq)


def factorize(M: SparseMatrix, order: Permutation | None = None, **kwargs) -> RegularizedFactor:
    """One-shot ordering, symbolic and numeric factorization of ``M``."""
    from .ordering import min_degree_order

    if order is None:
        order = min_degree_order(M)
    return numeric_factorize(M, symbolic_factorize(M, order), **kwargs)


# ---------------------------------------------------------------------------
# triangular solves


def _as_block(rhs, n):
    arr = np.array(rhs, dtype=np.float64, order="C", copy=True)
    vector = arr.ndim == 1
    if vector:
        arr = arr.reshape(-1, 1)
    if arr.shape[0] != n:
        raise DimensionError(f"right-hand side has {arr.shape[0]} rows, expected {n}")
    return arr, vector


def solve_lower(f: RegularizedFactor, rhs) -> np.ndarray:
    """Return ``X`` with ``L X = rhs``; ``rhs`` may be a vector or an m-by-p block."""
    x, vector = _as_block(rhs, f.n)
    pat = f.symbolic.L_pattern
    _lower_solve(f.n, pat.col_ptr, pat.row_idx, f.L_values, x)
    return x[:, 0] if vector else x


def solve_upper(f: RegularizedFactor, rhs) -> np.ndarray:
    """Return ``X`` with ``L^T X = rhs``."""
    x, vector = _as_block(rhs, f.n)
    pat = f.symbolic.L_pattern
    _upper_solve(f.n, pat.col_ptr, pat.row_idx, f.L_values, x)
    return x[:, 0] if vector else x
