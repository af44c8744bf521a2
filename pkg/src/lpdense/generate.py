"""Random LPs with planted dense columns, feasible by construction."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .model import StandardLp
from .mps import RawLp
from .sparse import SparseMatrix


def _sparse_block(rng, m, ncols, per_col):
    rows, cols = [], []
    for j in range(ncols):
        cnt = int(rng.integers(1, per_col + 1))
        rows.append(rng.choice(m, size=min(cnt, m), replace=False))
        cols.append(np.full(rows[-1].size, j))
    rows = np.concatenate(rows) if rows else np.zeros(0, dtype=int)
    cols = np.concatenate(cols) if cols else np.zeros(0, dtype=int)
    vals = rng.uniform(0.5, 2.0, rows.size) * rng.choice([-1.0, 1.0], rows.size)
    return sp.csc_matrix((vals, (rows, cols)), shape=(m, ncols))


@dataclass(frozen=True, eq=False)
class Instance:
    """A generated LP with the point it was built around.

    ``optimal_objective`` is known only for planted-optimum instances.
    """

    lp: StandardLp
    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    optimal_objective: float | None


def random_lp(m, n, n_dense=1, dense_frac=0.5, **kwargs) -> StandardLp:
    """Shorthand for ``random_instance(...).lp``."""
    return random_instance(m, n, n_dense, dense_frac, **kwargs).lp


def random_instance(m, n, n_dense=1, dense_frac=0.5, *, seed=0, upper_frac=0.0, per_col=3,
                    planted_optimum=False, deficient_rows=0, name=None) -> Instance:
    """A random standard-form LP whose feasibility is known in advance.

    Columns are laid out as ``[S_rand, I_m, D]``: random sparse columns with
    at most ``per_col`` nonzeros, an identity block that keeps ``A`` at full
    row rank, and ``n_dense`` columns with ``ceil(dense_frac * m)``
    nonzeros each.

    Parameters
    ----------
    m, n : int
        Rows and total columns; ``n >= m + n_dense``.
    upper_frac : float
        Fraction of columns given a finite upper bound.
    planted_optimum : bool
        If false, ``x*`` and ``z*`` are drawn strictly positive, so the LP is
        primal and dual feasible with an unknown optimum.  If true, ``x*`` is
        supported on the identity block and ``z*`` on the other columns, so
        ``x*`` is the unique optimum with objective ``c^T x*``.
    deficient_rows : int
        Number of rows whose only nonzeros sit in dense columns (identity
        entries removed as well), so the sparse part loses row rank while
        ``A`` keeps it.  Needs ``n_dense >= deficient_rows``.
    """
    if n < m + n_dense:
        raise ValueError("n must be at least m + n_dense")
    if deficient_rows > n_dense:
        raise ValueError("need at least as many dense columns as deficient rows")
    if deficient_rows and planted_optimum:
        raise ValueError("planted optimum relies on the identity block being intact")
    rng = np.random.default_rng(seed)
    n_rand = n - m - n_dense
    S_rand = _sparse_block(rng, m, n_rand, per_col).tolil()
    eye = sp.identity(m, format="lil")
    dnnz = max(1, math.ceil(dense_frac * m))
    bad = rng.choice(m, size=deficient_rows, replace=False) if deficient_rows else np.zeros(0, dtype=int)
    D = np.zeros((m, n_dense))
    for j in range(n_dense):
        others = np.setdiff1d(np.arange(m), bad)
        rows = np.concatenate([bad, rng.choice(others, size=max(0, dnnz - bad.size), replace=False)])
        D[rows, j] = rng.uniform(0.5, 2.0, rows.size) * rng.choice([-1.0, 1.0], rows.size)
    for i in bad:
        S_rand[i, :] = 0
        eye[i, i] = 0
    A = sp.hstack([S_rand.tocsc(), eye.tocsc(), sp.csc_matrix(D)]).tocsc()
    A.eliminate_zeros()

    y = rng.standard_normal(m)
    if planted_optimum:
        x = np.zeros(n)
        z = rng.uniform(0.5, 2.0, n)
        basis = np.arange(n_rand, n_rand + m)
        x[basis] = rng.uniform(0.5, 2.0, m)
        z[basis] = 0.0
    else:
        x = rng.uniform(0.5, 2.0, n)
        z = rng.uniform(0.5, 2.0, n)
    upper = np.full(n, np.inf)
    w = np.zeros(n)
    n_up = int(round(upper_frac * n))
    if n_up:
        cols = np.sort(rng.choice(n, size=n_up, replace=False))
        upper[cols] = x[cols] + rng.uniform(0.5, 2.0, n_up)
        if not planted_optimum:
            w[cols] = rng.uniform(0.5, 2.0, n_up)
    b = A @ x
    c = A.T @ y + z - w
    lp = StandardLp(SparseMatrix.from_scipy(A), b, c, upper,
                    name=name or f"rand_m{m}_n{n}_k{n_dense}_s{seed}")
    return Instance(lp, x, y, z, float(c @ x) if planted_optimum else None)


def to_raw(lp: StandardLp) -> RawLp:
    """Express a standard-form LP as equality rows, for writing to MPS."""
    m, n = lp.shape
    return RawLp(lp.name, lp.c, lp.A, ["E"] * m, lp.b, np.zeros(n), lp.upper.copy(),
                 [f"R{i}" for i in range(m)], [f"X{j}" for j in range(n)],
                 obj_constant=lp.obj_offset)
