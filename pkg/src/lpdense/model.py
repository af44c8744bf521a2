"""Standard-form LPs with upper bounds, trivial presolve and column splitting.

The standard form is::

    min  c^T x + obj_offset
    s.t. A x = b,  x >= 0,  x_i <= u_i  for i in upper_idx
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import ModelError
from .mps import RawLp
from .sparse import INDEX, Permutation, SparseMatrix


@dataclass(frozen=True, eq=False)
class StandardLp:
    """An LP in standard form with explicit upper bounds.

    Attributes
    ----------
    A : SparseMatrix
    b, c : ndarray
    upper : ndarray, shape (n,)
        ``inf`` where a variable has no upper bound.
    upper_idx : ndarray of int
        Indices with finite upper bound, increasing.
    obj_offset : float
        Constant added to ``c^T x`` to recover the original objective.
    free_origin : dict
        ``{original column: (plus column, minus column)}`` for split free
        variables.
    recovery : scipy.sparse.csr_matrix, shape (n_orig, n)
    recovery_offset : ndarray, shape (n_orig,)
        Original variables are ``recovery_offset + recovery @ x``.
    name : str
    """

    A: SparseMatrix
    b: np.ndarray
    c: np.ndarray
    upper: np.ndarray
    obj_offset: float = 0.0
    free_origin: dict = field(default_factory=dict)
    recovery: sp.csr_matrix | None = None
    recovery_offset: np.ndarray | None = None
    name: str = ""
    upper_idx: np.ndarray = field(init=False)

    def __post_init__(self):
        m, n = self.A.shape
        b = np.array(self.b, dtype=np.float64)
        c = np.array(self.c, dtype=np.float64)
        upper = np.array(self.upper, dtype=np.float64)
        if b.shape != (m,) or c.shape != (n,) or upper.shape != (n,):
            raise ModelError("StandardLp dimensions are inconsistent")
        if not (np.all(np.isfinite(b)) and np.all(np.isfinite(c))):
            raise ModelError("b and c must be finite")
        if np.any(upper < 0) or np.any(np.isnan(upper)):
            raise ModelError("upper bounds must be nonnegative")
        for j, (p, q) in self.free_origin.items():
            if not (0 <= p < n and 0 <= q < n) or p == q:
                raise ModelError(f"split pair for column {j} is invalid")
        idx = np.flatnonzero(np.isfinite(upper)).astype(INDEX)
        for name, arr in (("b", b), ("c", c), ("upper", upper)):
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        idx.flags.writeable = False
        object.__setattr__(self, "upper_idx", idx)
        if self.recovery is None:
            object.__setattr__(self, "recovery", sp.identity(n, format="csr"))
            object.__setattr__(self, "recovery_offset", np.zeros(n))

    @property
    def shape(self):
        return self.A.shape

    @property
    def m(self):
        return self.A.nrows

    @property
    def n(self):
        return self.A.ncols

    def upper_values(self):
        """``u`` restricted to ``upper_idx``."""
        return self.upper[self.upper_idx]

    def objective(self, x):
        return float(self.c @ x) + self.obj_offset

    def recover(self, x):
        """Map a standard-form point back to the original variables."""
        return self.recovery_offset + self.recovery @ np.asarray(x, dtype=np.float64)


@dataclass(frozen=True)
class PresolveInfo:
    """What :func:`presolve` removed, in original indices."""

    kept_rows: np.ndarray
    kept_cols: np.ndarray
    fixed_values: np.ndarray       # value for every original column, nan if kept
    removed_fixed: int
    removed_empty_cols: int
    removed_empty_rows: int


def _row_hashes(A_csr):
    keys = []
    for i in range(A_csr.shape[0]):
        lo, hi = A_csr.indptr[i], A_csr.indptr[i + 1]
        keys.append(hash((A_csr.indices[lo:hi].tobytes(), A_csr.data[lo:hi].tobytes())))
    return keys


def presolve(raw: RawLp, tol=1e-9):
    """Trivial reductions on a raw LP, repeated until nothing changes.

    Fixed variables are substituted out, empty columns are set to their
    cost-minimizing bound, empty rows are checked for consistency and
    dropped.  Two identical equality rows (same coefficients, detected by
    hashing) make ``A`` rank deficient and are reported as an error.

    Returns
    -------
    reduced : RawLp
    info : PresolveInfo

    Raises
    ------
    ModelError
        Inconsistent bounds or empty rows, an unbounded empty column, or
        duplicate equality rows.
    """
    m, n = raw.shape
    if np.any(raw.lower > raw.upper):
        j = int(np.flatnonzero(raw.lower > raw.upper)[0])
        raise ModelError(f"column {raw.col_names[j]!r} has lower bound above upper bound")
    A = raw.A.to_scipy()
    rows = np.arange(m)
    cols = np.arange(n)
    b = raw.b.copy()
    fixed = np.full(n, np.nan)
    obj_const = raw.obj_constant
    n_fixed = n_ecol = n_erow = 0
    while True:
        changed = False
        sub = A[rows][:, cols]
        lo, up = raw.lower[cols], raw.upper[cols]
        is_fixed = lo == up
        empty_col = np.diff(sub.indptr) == 0
        drop = is_fixed | empty_col
        if drop.any():
            vals = np.where(is_fixed, lo, np.nan)
            for k in np.flatnonzero(empty_col & ~is_fixed):
                cj = raw.c[cols[k]]
                if cj > 0:
                    vals[k] = lo[k]
                elif cj < 0:
                    vals[k] = up[k]
                else:
                    vals[k] = lo[k] if np.isfinite(lo[k]) else (up[k] if np.isfinite(up[k]) else 0.0)
                if not np.isfinite(vals[k]):
                    raise ModelError(f"column {raw.col_names[cols[k]]!r} is empty and unbounded")
            b[rows] -= sub[:, drop] @ vals[drop]
            obj_const += float(raw.c[cols[drop]] @ vals[drop])
            fixed[cols[drop]] = vals[drop]
            n_fixed += int(is_fixed.sum())
            n_ecol += int((empty_col & ~is_fixed).sum())
            cols = cols[~drop]
            changed = True
        sub_r = A[rows][:, cols].tocsr()
        empty_row = np.diff(sub_r.indptr) == 0
        if empty_row.any():
            for k in np.flatnonzero(empty_row):
                i = rows[k]
                lo_r, hi_r = _row_interval(raw.row_kinds[i], b[i], raw.ranges[i])
                scale = tol * max(1.0, abs(b[i]))
                if lo_r > scale or hi_r < -scale:
                    raise ModelError(f"empty row {raw.row_names[i]!r} is infeasible")
            n_erow += int(empty_row.sum())
            rows = rows[~empty_row]
            changed = True
        if not changed:
            break
    sub = A[rows][:, cols].tocsr()
    seen = {}
    for k, key in enumerate(_row_hashes(sub)):
        if raw.row_kinds[rows[k]] != "E" or not np.isnan(raw.ranges[rows[k]]):
            continue
        if key in seen:
            other = seen[key]
            a0, a1 = sub.indptr[k], sub.indptr[k + 1]
            b0, b1 = sub.indptr[other], sub.indptr[other + 1]
            if (np.array_equal(sub.indices[a0:a1], sub.indices[b0:b1])
                    and np.array_equal(sub.data[a0:a1], sub.data[b0:b1])):
                raise ModelError(f"rows {raw.row_names[rows[other]]!r} and "
                                 f"{raw.row_names[rows[k]]!r} are duplicates")
        seen[key] = k
    reduced = RawLp(raw.name, raw.c[cols], SparseMatrix.from_scipy(sub), [raw.row_kinds[i] for i in rows],
                    b[rows], raw.lower[cols], raw.upper[cols], [raw.row_names[i] for i in rows],
                    [raw.col_names[j] for j in cols], raw.ranges[rows], raw.obj_name, obj_const)
    return reduced, PresolveInfo(rows, cols, fixed, n_fixed, n_ecol, n_erow)


def _row_interval(kind, rhs, rng):
    """Interval ``[lo, hi]`` that ``a^T x`` must lie in."""
    if np.isnan(rng):
        return {"E": (rhs, rhs), "L": (-np.inf, rhs), "G": (rhs, np.inf)}[kind]
    r = abs(rng)
    if kind == "E":
        return (rhs, rhs + r) if rng > 0 else (rhs - r, rhs)
    if kind == "L":
        return rhs - r, rhs
    return rhs, rhs + r


def standardize(raw: RawLp, presolve_first=True) -> StandardLp:
    """Convert a raw LP to standard form.

    Columns are laid out as: the original columns (shifted, or negated when
    only an upper bound is finite), then the negative parts of split free
    variables, then one slack per inequality or ranged row.

    Raises
    ------
    ModelError
        If some variable has ``lower > upper`` or presolve finds the model
        inconsistent.
    """
    n_orig = raw.shape[1]
    if np.any(raw.lower > raw.upper):
        j = int(np.flatnonzero(raw.lower > raw.upper)[0])
        raise ModelError(f"column {raw.col_names[j]!r} has lower bound above upper bound")
    if presolve_first:
        red, info = presolve(raw)
        kept_cols = info.kept_cols
        base_offset = np.where(np.isnan(info.fixed_values), 0.0, info.fixed_values)
    else:
        red = raw
        kept_cols = np.arange(n_orig)
        base_offset = np.zeros(n_orig)
    m, n = red.shape
    A = red.A.to_scipy()
    lo, up = red.lower, red.upper
    c = red.c.copy()
    b = red.b.copy()
    obj = red.obj_constant
    sign = np.ones(n)
    shift = np.zeros(n)
    upper = np.full(n, np.inf)

    has_lo = np.isfinite(lo)
    has_up = np.isfinite(up)
    both = has_lo & has_up
    lo_only = has_lo & ~has_up
    up_only = ~has_lo & has_up
    free = ~has_lo & ~has_up
    shift[has_lo] = lo[has_lo]
    upper[both] = up[both] - lo[both]
    # x = u - x'
    shift[up_only] = up[up_only]
    sign[up_only] = -1.0
    del lo_only

    b -= A @ shift
    obj += float(c @ shift)
    c *= sign
    A = A @ sp.diags(sign)

    free_cols = np.flatnonzero(free)
    extra_blocks = [A[:, free_cols] * -1.0]
    extra_c = [-c[free_cols]]
    free_origin = {}
    for k, j in enumerate(free_cols):
        free_origin[int(kept_cols[j])] = (int(j), n + k)

    # slacks
    srows, scoef, supper = [], [], []
    for i, kind in enumerate(red.row_kinds):
        rng = red.ranges[i]
        if np.isnan(rng):
            if kind == "L":
                srows.append(i), scoef.append(1.0), supper.append(np.inf)
            elif kind == "G":
                srows.append(i), scoef.append(-1.0), supper.append(np.inf)
            continue
        lo_r, hi_r = _row_interval(kind, b[i], rng)
        # a^T x - s = lo_r, 0 <= s <= hi_r - lo_r
        b[i] = lo_r
        srows.append(i), scoef.append(-1.0), supper.append(hi_r - lo_r)
    ns = len(srows)
    slack = sp.csc_matrix((scoef, (srows, np.arange(ns))), shape=(m, ns))
    A_std = sp.hstack([A] + extra_blocks + [slack], format="csc")
    c_std = np.concatenate([c] + extra_c + [np.zeros(ns)])
    upper_std = np.concatenate([upper, np.full(free_cols.size, np.inf), np.asarray(supper, dtype=float)])
    n_std = A_std.shape[1]

    # x_orig[kept_cols[j]] = shift_j + sign_j * x_j  (- x_minus for free)
    r_rows = list(kept_cols)
    r_cols = list(range(n))
    r_vals = list(sign)
    for k, j in enumerate(free_cols):
        r_rows.append(kept_cols[j])
        r_cols.append(n + k)
        r_vals.append(-1.0)
    recovery = sp.csr_matrix((r_vals, (r_rows, r_cols)), shape=(n_orig, n_std))
    offset = base_offset.copy()
    offset[kept_cols] = shift
    return StandardLp(SparseMatrix.from_scipy(A_std), b, c_std, upper_std, obj,
                      free_origin, recovery, offset, raw.name)


@dataclass(frozen=True)
class DensityPolicy:
    """Rule deciding which columns are dense.

    A column is dense when its nonzero count reaches
    ``max(min_abs, ceil(frac * m))``.  With fewer than ``min_rows`` rows the
    rule is off (every column sparse) unless ``force`` is set.
    """

    frac: float = 0.3
    min_abs: int = 100
    min_rows: int = 500
    force: bool = False

    def __post_init__(self):
        if not (0 <= self.frac <= 1):
            raise ValueError("frac must lie in [0, 1]")
        if self.min_abs < 0 or self.min_rows < 0:
            raise ValueError("min_abs and min_rows must be nonnegative")

    def threshold(self, m: int) -> int:
        """The nonzero count at which a column becomes dense; ``m + 1`` when off."""
        if m < self.min_rows and not self.force:
            return m + 1
        return max(int(self.min_abs), math.ceil(self.frac * m))


@dataclass(frozen=True)
class ColumnPartition:
    """Split of the columns of ``A`` into a sparse block ``S`` and a dense block ``D``.

    ``P1.perm`` lists ``sparse_idx`` followed by ``dense_idx``.
    """

    P1: Permutation
    sparse_idx: np.ndarray
    dense_idx: np.ndarray
    threshold_used: int

    @property
    def k(self):
        return int(self.dense_idx.size)


def detect_dense(A: SparseMatrix, policy: DensityPolicy | None = None) -> ColumnPartition:
    """Partition the columns of ``A`` by nonzero count."""
    policy = DensityPolicy() if policy is None else policy
    thr = policy.threshold(A.nrows)
    counts = A.col_counts()
    dense = counts >= thr
    sparse_idx = np.flatnonzero(~dense).astype(INDEX)
    dense_idx = np.flatnonzero(dense).astype(INDEX)
    P1 = Permutation.from_order(np.concatenate([sparse_idx, dense_idx]))
    return ColumnPartition(P1, sparse_idx, dense_idx, int(thr))


def scale_lp(lp: StandardLp, passes=8) -> StandardLp:
    """Geometric row and column scaling, ``A <- R A C``.

    Each pass divides every row, then every column, by the geometric mean
    of its largest and smallest absolute entries; a final pass makes the
    largest entry of every column equal to one.  The scaled problem has
    variables ``x_hat = C^{-1} x`` and the same objective value, and its
    ``recover`` maps straight back to the original variables.
    """
    A = lp.A.to_scipy()
    m, n = A.shape
    r = np.ones(m)
    s = np.ones(n)
    if A.nnz:
        for _ in range(passes):
            B = abs(sp.diags(r) @ A @ sp.diags(s)).tocsr()
            rmax = B.max(axis=1).toarray().ravel()
            rmin = _nz_min(B)
            ok = rmax > 0
            r[ok] /= np.sqrt(rmax[ok] * rmin[ok])
            B = abs(sp.diags(r) @ A @ sp.diags(s)).tocsc()
            cmax = B.max(axis=0).toarray().ravel()
            cmin = _nz_min(B.T.tocsr())
            ok = cmax > 0
            s[ok] /= np.sqrt(cmax[ok] * cmin[ok])
        B = abs(sp.diags(r) @ A @ sp.diags(s)).tocsc()
        cmax = B.max(axis=0).toarray().ravel()
        s[cmax > 0] /= cmax[cmax > 0]
    # powers of two keep the scaling itself exact
    r = np.exp2(np.round(np.log2(r)))
    s = np.exp2(np.round(np.log2(s)))
    As = sp.diags(r) @ A @ sp.diags(s)
    upper = lp.upper / s
    return StandardLp(SparseMatrix.from_scipy(As), lp.b * r, lp.c * s, upper, lp.obj_offset,
                      dict(lp.free_origin), (lp.recovery @ sp.diags(s)).tocsr(), lp.recovery_offset,
                      lp.name)


def _nz_min(B_csr):
    out = np.zeros(B_csr.shape[0])
    for i in range(B_csr.shape[0]):
        lo, hi = B_csr.indptr[i], B_csr.indptr[i + 1]
        if hi > lo:
            out[i] = B_csr.data[lo:hi].min()
    return out
