"""Compressed sparse column matrices, permutations and scaled Gram products.

The :class:`SparseMatrix` container is deliberately small: it owns the CSC
arrays and validates them, while arithmetic is delegated to
:mod:`scipy.sparse` through :meth:`SparseMatrix.to_scipy`.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .errors import DimensionError, DomainError

INDEX = np.int64


@dataclass(frozen=True, eq=False)
class SparseMatrix:
    """Compressed sparse column matrix.

    Within a column the row indices are strictly increasing and explicit
    zeros are never stored.  Instances are immutable; the arrays are marked
    read-only on construction.
    """

    nrows: int
    ncols: int
    col_ptr: np.ndarray
    row_idx: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        col_ptr = np.ascontiguousarray(self.col_ptr, dtype=INDEX)
        row_idx = np.ascontiguousarray(self.row_idx, dtype=INDEX)
        values = np.ascontiguousarray(self.values, dtype=np.float64)
        _check_csc(self.nrows, self.ncols, col_ptr, row_idx, values)
        for arr in (col_ptr, row_idx, values):
            arr.flags.writeable = False
        object.__setattr__(self, "col_ptr", col_ptr)
        object.__setattr__(self, "row_idx", row_idx)
        object.__setattr__(self, "values", values)

    # -- construction -----------------------------------------------------

    @classmethod
    def from_scipy(cls, mat) -> "SparseMatrix":
        """Build from any scipy sparse matrix or array; exact zeros are dropped."""
        csc = sp.csc_matrix(mat, dtype=np.float64, copy=True)
        csc.sum_duplicates()
        csc.eliminate_zeros()
        csc.sort_indices()
        return cls(csc.shape[0], csc.shape[1], csc.indptr, csc.indices, csc.data)

    @classmethod
    def from_dense(cls, arr) -> "SparseMatrix":
        arr = np.atleast_2d(np.asarray(arr, dtype=np.float64))
        return cls.from_scipy(sp.csc_matrix(arr))

    @classmethod
    def from_triplets(cls, nrows, ncols, rows, cols, vals) -> "SparseMatrix":
        """Build from coordinate triplets; duplicates are summed."""
        coo = sp.coo_matrix((np.asarray(vals, dtype=np.float64),
                             (np.asarray(rows, dtype=INDEX), np.asarray(cols, dtype=INDEX))),
                            shape=(nrows, ncols))
        return cls.from_scipy(coo)

    @classmethod
    def identity(cls, n) -> "SparseMatrix":
        return cls(n, n, np.arange(n + 1), np.arange(n), np.ones(n))

    @classmethod
    def empty(cls, nrows, ncols) -> "SparseMatrix":
        return cls(nrows, ncols, np.zeros(ncols + 1), np.zeros(0), np.zeros(0))

    # -- views ------------------------------------------------------------

    @property
    def shape(self):
        return (self.nrows, self.ncols)

    @property
    def nnz(self) -> int:
        return int(self.col_ptr[-1])

    def col_counts(self) -> np.ndarray:
        return np.diff(self.col_ptr)

    def to_scipy(self) -> sp.csc_matrix:
        # scipy copies nothing here, so hand it writable copies
        return sp.csc_matrix((self.values.copy(), self.row_idx.copy(), self.col_ptr.copy()),
                             shape=self.shape)

    @cached_property
    def csc(self) -> sp.csc_matrix:
        """Shared read-only scipy view, for arithmetic only."""
        return sp.csc_matrix((self.values, self.row_idx, self.col_ptr), shape=self.shape)

    def to_dense(self) -> np.ndarray:
        return self.to_scipy().toarray()

    def select_columns(self, idx) -> "SparseMatrix":
        idx = np.asarray(idx, dtype=INDEX)
        return SparseMatrix.from_scipy(self.to_scipy()[:, idx])

    def transpose(self) -> "SparseMatrix":
        return SparseMatrix.from_scipy(self.to_scipy().T)

    def __repr__(self):
        return f"SparseMatrix({self.nrows}x{self.ncols}, nnz={self.nnz})"


def _check_csc(nrows, ncols, col_ptr, row_idx, values):
    if nrows < 0 or ncols < 0:
        raise DimensionError("negative dimension")
    if col_ptr.shape != (ncols + 1,):
        raise DimensionError(f"col_ptr must have length {ncols + 1}")
    if col_ptr[0] != 0 or np.any(np.diff(col_ptr) < 0):
        raise DomainError("col_ptr must start at 0 and be non-decreasing")
    nnz = int(col_ptr[-1])
    if row_idx.shape != (nnz,) or values.shape != (nnz,):
        raise DimensionError("row_idx/values length must equal col_ptr[-1]")
    if nnz == 0:
        return
    if row_idx.min() < 0 or row_idx.max() >= nrows:
        raise DomainError("row index out of range")
    # strictly increasing inside each column: a step down is only allowed
    # where a new column starts
    steps = np.diff(row_idx)
    starts = np.zeros(nnz, dtype=bool)
    starts[col_ptr[1:-1][col_ptr[1:-1] < nnz]] = True
    if np.any((steps <= 0) & ~starts[1:]):
        raise DomainError("row indices must be strictly increasing within a column")
    if np.any(values == 0.0):
        raise DomainError("explicit zeros are not allowed")


@dataclass(frozen=True, eq=False)
class Permutation:
    """A bijection on ``{0..n-1}``.

    ``perm[i]`` is the original index placed at position ``i``; applying the
    permutation to a vector is ``v[perm]`` and to a symmetric matrix is
    ``M[perm][:, perm]``.
    """

    perm: np.ndarray
    inv_perm: np.ndarray

    @classmethod
    def from_order(cls, order) -> "Permutation":
        perm = np.asarray(order, dtype=INDEX).copy()
        n = perm.size
        if n and (np.sort(perm) != np.arange(n)).any():
            raise DomainError("order is not a permutation")
        inv = np.empty_like(perm)
        inv[perm] = np.arange(n, dtype=INDEX)
        perm.flags.writeable = False
        inv.flags.writeable = False
        return cls(perm, inv)

    @classmethod
    def identity(cls, n) -> "Permutation":
        return cls.from_order(np.arange(n))

    def __len__(self):
        return self.perm.size

    def apply(self, v):
        """Return ``P v`` (rows of a matrix are permuted as well)."""
        return np.asarray(v)[self.perm]

    def apply_inverse(self, v):
        """Return ``P^T v``."""
        return np.asarray(v)[self.inv_perm]


def spmv(A: SparseMatrix, x, transpose=False) -> np.ndarray:
    """Return ``A @ x`` or ``A.T @ x``."""
    x = np.asarray(x, dtype=np.float64)
    expected = A.nrows if transpose else A.ncols
    if x.shape[0] != expected:
        raise DimensionError(f"vector length {x.shape[0]} does not match {expected}")
    return A.csc.T @ x if transpose else A.csc @ x


class GramPattern:
    """Fixed-pattern evaluator for ``S diag(lam) S^T`` (lower triangle).

    The pattern of the product does not depend on ``lam``; every IPM
    iteration only refreshes values.  Each output entry ``(i, j)`` with
    ``i >= j`` is the sum over the columns ``l`` containing both rows of
    ``lam[l] * S[i, l] * S[j, l]``, so the contributing products are
    enumerated once and reduced with ``bincount``.
    """

    def __init__(self, S: SparseMatrix):
        self.nrows = S.nrows
        self.ncols = S.ncols
        counts = S.col_counts()
        npairs = counts * (counts + 1) // 2
        total = int(npairs.sum())
        col_of = np.empty(total, dtype=INDEX)
        prow = np.empty(total, dtype=INDEX)
        pcol = np.empty(total, dtype=INDEX)
        pval = np.empty(total)
        pos = 0
        # group columns by count so the pair enumeration is vectorised
        for cnt in np.unique(counts):
            if cnt == 0:
                continue
            cols = np.flatnonzero(counts == cnt)
            a, b = np.tril_indices(cnt)
            base = S.col_ptr[cols][:, None]
            ia = (base + a[None, :]).ravel()
            ib = (base + b[None, :]).ravel()
            block = cols.size * a.size
            prow[pos:pos + block] = S.row_idx[ia]
            pcol[pos:pos + block] = S.row_idx[ib]
            pval[pos:pos + block] = S.values[ia] * S.values[ib]
            col_of[pos:pos + block] = np.repeat(cols, a.size)
            pos += block
        key = pcol * max(self.nrows, 1) + prow
        uniq, slot = np.unique(key, return_inverse=True)
        self._slot = slot
        self._col_of = col_of
        self._pval = pval
        rows = uniq % max(self.nrows, 1)
        cols = uniq // max(self.nrows, 1)
        self.row_idx = rows.astype(INDEX)
        self.col_ptr = np.searchsorted(cols, np.arange(self.nrows + 1)).astype(INDEX)
        self.nnz = uniq.size

    def values(self, lam) -> np.ndarray:
        lam = np.asarray(lam, dtype=np.float64)
        if lam.shape != (self.ncols,):
            raise DimensionError("scaling vector length must equal ncols(S)")
        return np.bincount(self._slot, weights=lam[self._col_of] * self._pval,
                           minlength=self.nnz)

    def pattern(self) -> SparseMatrix:
        """The lower-triangular pattern with unit values."""
        return SparseMatrix(self.nrows, self.nrows, self.col_ptr, self.row_idx,
                            np.ones(self.nnz))

    def evaluate(self, lam) -> SparseMatrix:
        vals = self.values(lam)
        keep = vals != 0.0
        if keep.all():
            return SparseMatrix(self.nrows, self.nrows, self.col_ptr, self.row_idx, vals)
        kept = np.concatenate(([0], np.cumsum(keep)))
        col_ptr = kept[self.col_ptr]
        return SparseMatrix(self.nrows, self.nrows, col_ptr, self.row_idx[keep], vals[keep])


def form_scaled_gram(S: SparseMatrix, lambda_s) -> SparseMatrix:
    """Return the lower triangle of ``S diag(lambda_s) S^T``.

    Raises
    ------
    DomainError
        If any scaling entry is not strictly positive.
    """
    lam = np.asarray(lambda_s, dtype=np.float64)
    if lam.shape != (S.ncols,):
        raise DimensionError("lambda_s length must equal ncols(S)")
    if np.any(~(lam > 0)):
        raise DomainError("scaling entries must be strictly positive")
    return GramPattern(S).evaluate(lam)


def symmetric_from_lower(M: SparseMatrix) -> sp.csc_matrix:
    """Expand a lower-triangle-stored symmetric matrix to full storage."""
    low = M.to_scipy()
    return (low + sp.tril(low, k=-1).T).tocsc()
