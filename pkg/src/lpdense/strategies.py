"""Ways of computing ``dy`` from the normal equations ``A Lam A^T dy = q``.

Three variants share one interface:

``proposed``
    Factor only the sparse part, ``L L^T = P2 S Lam_S S^T P2^T + F F^T``,
    and run CG on the preconditioned operator ``W = I + G G^T - J J^T`` with
    ``G = L^{-1} P2 D Lam_D^{1/2}`` and ``J = -L^{-1} F``.
``full``
    Factor the whole ``A Lam A^T`` with every column treated as sparse.
``smw``
    Factor the sparse part and add the dense columns back through the
    Sherman-Morrison-Woodbury identity.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .cholesky import (DEFAULT_PIVOT_TOL, RegularizedFactor, numeric_factorize, solve_lower,
                       solve_upper, symbolic_factorize)
from .errors import DimensionError, DomainError, StrategyError
from .krylov import conjugate_gradient
from .model import ColumnPartition, DensityPolicy, detect_dense
from .ordering import min_degree_order
from .sparse import GramPattern, Permutation, SparseMatrix

VARIANTS = ("proposed", "full", "smw")
# condition number past which a capacitance matrix counts as singular
CAPACITANCE_COND_LIMIT = 1e14
RESIDUAL_FACTOR = 10.0
# CG tolerance tightenings tried when the normal-equations residual is too large
RETRY_SHRINK = (1e-2, 1e-4)
REFINE_STEPS = 3


def _as_dense(D, m):
    if isinstance(D, SparseMatrix):
        return D.to_dense()
    D = np.asarray(D, dtype=np.float64)
    return D.reshape(m, -1) if D.size else np.zeros((m, 0))


def _positive(name, lam, size):
    lam = np.asarray(lam, dtype=np.float64)
    if lam.shape != (size,):
        raise DimensionError(f"{name} must have length {size}")
    if np.any(~(lam > 0)):
        raise DomainError(f"{name} must be strictly positive")
    return lam


class SparseFactorizer:
    """Ordering and symbolic analysis of ``S Lam S^T``, done once.

    Only the numeric factorization is repeated when the scaling changes.
    """

    def __init__(self, S: SparseMatrix, pivot_rel_tol=DEFAULT_PIVOT_TOL):
        self.S = S
        self.gram = GramPattern(S)
        pattern = self.gram.pattern()
        self.symbolic = symbolic_factorize(pattern, min_degree_order(pattern))
        self.pivot_rel_tol = pivot_rel_tol

    def factor(self, lambda_s) -> RegularizedFactor:
        lam = _positive("lambda_s", lambda_s, self.S.ncols)
        M = self.gram.evaluate(lam)
        return numeric_factorize(M, self.symbolic, self.pivot_rel_tol)


def _normal_apply(S, D, lambda_s, lambda_d, v):
    Ss = S.csc if isinstance(S, SparseMatrix) else S
    out = Ss @ (lambda_s * (Ss.T @ v))
    if D.shape[1]:
        out += D @ (lambda_d * (D.T @ v))
    return out


def _check_residual(S, D, lambda_s, lambda_d, dy, q, limit):
    r = _normal_apply(S, D, lambda_s, lambda_d, dy) - q
    rn = float(np.linalg.norm(r))
    return rn <= limit * float(np.linalg.norm(q)), rn


@dataclass(frozen=True, eq=False)
class WOperator:
    """The preconditioned normal-equations operator ``I + G G^T - J J^T``.

    ``S``, ``D`` and the scalings are kept so the unpreconditioned residual
    can be checked after a solve.
    """

    factor: RegularizedFactor
    G: np.ndarray
    J: np.ndarray
    S: SparseMatrix
    D: np.ndarray
    lambda_s: np.ndarray
    lambda_d: np.ndarray

    @property
    def m(self):
        return self.factor.n

    @property
    def k(self):
        return self.G.shape[1]

    @property
    def d(self):
        return self.J.shape[1]

    def apply(self, v):
        return apply_w(self, v)

    def max_abs_entry(self) -> float:
        """``max |W_ij|`` without forming ``W``.

        ``W`` is positive definite, so its largest entry in magnitude sits on
        the diagonal, where ``W_ii = 1 + |G_i|^2 - |J_i|^2``.
        """
        diag = 1.0 + np.einsum("ij,ij->i", self.G, self.G) - np.einsum("ij,ij->i", self.J, self.J)
        return float(diag.max()) if diag.size else 0.0


def build_w_operator(S: SparseMatrix, D, lambda_s, lambda_d, *, factorizer: SparseFactorizer | None = None,
                     pivot_rel_tol=DEFAULT_PIVOT_TOL) -> WOperator:
    """Factor the sparse part and form the dense blocks ``G`` and ``J``.

    Parameters
    ----------
    S : SparseMatrix, shape (m, n - k)
    D : ndarray or SparseMatrix, shape (m, k)
    lambda_s, lambda_d : ndarray
        Positive scalings of the sparse and dense columns.
    factorizer : SparseFactorizer, optional
        Reused symbolic analysis; built on the fly when omitted.
    """
    m = S.nrows
    D = _as_dense(D, m)
    lambda_d = _positive("lambda_d", lambda_d, D.shape[1])
    fz = SparseFactorizer(S, pivot_rel_tol) if factorizer is None else factorizer
    f = fz.factor(lambda_s)
    lambda_s = np.asarray(lambda_s, dtype=np.float64)
    if D.shape[1]:
        G = solve_lower(f, f.P2.apply(D * np.sqrt(lambda_d)))
    else:
        G = np.zeros((m, 0))
    if f.d:
        J = -solve_lower(f, f.F_dense())
    else:
        J = np.zeros((m, 0))
    return WOperator(f, G, J, S, D, lambda_s, lambda_d)


def apply_w(op: WOperator, v) -> np.ndarray:
    """Return ``v + G (G^T v) - J (J^T v)``."""
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (op.m,):
        raise DimensionError(f"vector length {v.shape[0] if v.ndim else 0} does not match {op.m}")
    out = v.copy()
    if op.k:
        out += op.G @ (op.G.T @ v)
    if op.d:
        out -= op.J @ (op.J.T @ v)
    return out


def solve_dy_proposed(op: WOperator, q, cg_tol=1e-8, cg_max=200, *, strict=False):
    """Solve ``A Lam A^T dy = q`` with the preconditioned operator.

    After CG on ``W`` the residual ``||A Lam A^T dy - q||`` is checked
    against ``10 cg_tol ||q||``; on failure CG is resumed with tighter
    tolerances.  Late in an IPM run ``W`` can be far worse conditioned than
    ``A Lam A^T`` itself, and the check may stay out of reach.

    Parameters
    ----------
    strict : bool
        Raise when the residual check still fails after the retries,
        instead of returning the best ``dy`` found.

    Returns
    -------
    dy : ndarray
    cg_iters : int
        CG iterations, including retries.

    Raises
    ------
    StrategyError
        If CG does not converge within ``cg_max`` iterations, or (with
        ``strict``) the residual check fails.
    """
    dy, total, ok, rel = proposed_solve_checked(op, q, cg_tol, cg_max)
    if strict and not ok:
        raise StrategyError(f"normal-equations relative residual {rel:.2e} exceeds "
                            f"{RESIDUAL_FACTOR * cg_tol:.0e}", total)
    return dy, total


def proposed_solve_checked(op: WOperator, q, cg_tol=1e-8, cg_max=200):
    """Like :func:`solve_dy_proposed` but also report the residual check.

    Returns
    -------
    dy, cg_iters, passed, relative_residual
    """
    q = np.asarray(q, dtype=np.float64)
    f = op.factor
    q1 = solve_lower(f, f.P2.apply(q))
    omega, rep = conjugate_gradient(op.apply, q1, tol=cg_tol, max_iter=cg_max)
    total = rep.iterations
    if not rep.converged:
        raise StrategyError(f"CG did not converge in {cg_max} iterations "
                            f"(relative residual {rep.final_rel_residual:.2e})", total)
    limit = RESIDUAL_FACTOR * cg_tol
    dy = f.P2.apply_inverse(solve_upper(f, omega))
    ok, rn = _check_residual(op.S, op.D, op.lambda_s, op.lambda_d, dy, q, limit)
    best = (rn, dy)
    for shrink in RETRY_SHRINK:
        if ok:
            break
        omega, rep = conjugate_gradient(op.apply, q1, x0=omega, tol=cg_tol * shrink, max_iter=cg_max)
        total += rep.iterations
        dy = f.P2.apply_inverse(solve_upper(f, omega))
        ok, rn = _check_residual(op.S, op.D, op.lambda_s, op.lambda_d, dy, q, limit)
        if rn < best[0]:
            best = (rn, dy)
    rn, dy = best
    qn = float(np.linalg.norm(q))
    return dy, total, ok, (rn / qn if qn > 0 else 0.0)


def _woodbury_solve(f: RegularizedFactor, Y, signs, q, lu):
    """Solve ``P2^T (L L^T + U diag(signs) U^T) P2 x = q``.

    ``Y = L^{-1} U`` and ``lu`` factors the capacitance ``diag(signs) + Y^T Y``.
    """
    q1 = solve_lower(f, f.P2.apply(q))
    if Y.shape[1]:
        q1 = q1 - Y @ sla.lu_solve(lu, Y.T @ q1)
    return f.P2.apply_inverse(solve_upper(f, q1))


def _capacitance(Y, signs):
    C = np.diag(signs) + Y.T @ Y
    if not np.all(np.isfinite(C)):
        raise StrategyError("capacitance matrix is not finite")
    cond = np.linalg.cond(C)
    if not np.isfinite(cond) or cond > CAPACITANCE_COND_LIMIT:
        raise StrategyError(f"capacitance matrix is singular (condition {cond:.2e})")
    return sla.lu_factor(C)


def solve_dy_smw(S: SparseMatrix, D, lambda_s, lambda_d, q, *, factorizer: SparseFactorizer | None = None,
                 check_tol=1e-8, strict=False):
    """Solve the normal equations by a Woodbury update of the sparse factor.

    With ``U = [P2 D Lam_D^{1/2}, F]`` and signature ``(+I_k, -I_d)`` the
    matrix is ``P2^T (L L^T + U diag(s) U^T) P2``, whose inverse needs only
    the ``(k + d)``-square capacitance matrix ``diag(s) + U^T L^{-T} L^{-1} U``.

    Raises
    ------
    StrategyError
        If the capacitance matrix is numerically singular, or (with
        ``strict``) the residual exceeds ``10 check_tol ||q||``.
    """
    op = build_w_operator(S, D, lambda_s, lambda_d, factorizer=factorizer)
    dy, ok, rel = smw_solve_checked(op, q, check_tol)
    if strict and not ok:
        raise StrategyError(f"Woodbury solve relative residual {rel:.2e} is too large")
    return dy


def smw_solve_checked(op: WOperator, q, check_tol=1e-8):
    """Woodbury solve on a built operator; returns ``(dy, passed, relative_residual)``."""
    q = np.asarray(q, dtype=np.float64)
    # J = -L^{-1} F, the sign is irrelevant inside Y Y^T
    Y = np.hstack([op.G, -op.J])
    signs = np.concatenate([np.ones(op.k), -np.ones(op.d)])
    lu = _capacitance(Y, signs) if Y.shape[1] else None
    dy = _woodbury_solve(op.factor, Y, signs, q, lu)
    limit = RESIDUAL_FACTOR * check_tol
    ok, rn = _check_residual(op.S, op.D, op.lambda_s, op.lambda_d, dy, q, limit)
    # iterative refinement with the same Woodbury inverse, kept while it helps
    for _ in range(REFINE_STEPS):
        if ok:
            break
        r = q - _normal_apply(op.S, op.D, op.lambda_s, op.lambda_d, dy)
        cand = dy + _woodbury_solve(op.factor, Y, signs, r, lu)
        ok_c, rn_c = _check_residual(op.S, op.D, op.lambda_s, op.lambda_d, cand, q, limit)
        if not rn_c < rn:
            break
        dy, ok, rn = cand, ok_c, rn_c
    qn = float(np.linalg.norm(q))
    return dy, ok, (rn / qn if qn > 0 else 0.0)


def solve_dy_full(A: SparseMatrix, lam, q, *, factorizer: SparseFactorizer | None = None):
    """Direct Cholesky solve of ``A Lam A^T dy = q`` with all columns sparse.

    When small pivots were regularized, the ``-F F^T`` correction is applied
    through Woodbury if its capacitance matrix is well conditioned; otherwise
    the regularized factor is used as is, which drops the near-null
    components in the way classical IPM codes do.
    """
    fz = SparseFactorizer(A) if factorizer is None else factorizer
    f = fz.factor(lam)
    return _full_solve(f, q)


def _full_solve(f: RegularizedFactor, q):
    q = np.asarray(q, dtype=np.float64)
    if f.d:
        Y = solve_lower(f, f.F_dense())
        signs = -np.ones(f.d)
        try:
            lu = _capacitance(Y, signs)
        except StrategyError:
            return _woodbury_solve(f, Y[:, :0], signs[:0], q, None)
        return _woodbury_solve(f, Y, signs, q, lu)
    return _woodbury_solve(f, np.zeros((f.n, 0)), np.zeros(0), q, None)


def spectral_probe(op: WOperator, max_m=500):
    """Dense eigen-analysis of ``W`` for testing.

    With no regularized pivots ``W = I + G G^T`` and its spectrum is taken
    as ``1 + sigma(G)^2``, which avoids round-off of order ``eps ||W||`` in
    the smallest eigenvalue.

    Returns
    -------
    lambda_min, lambda_max, max_abs_entry : float
    """
    if op.m > max_m:
        raise DimensionError(f"spectral_probe is limited to m <= {max_m}")
    W = np.eye(op.m) + op.G @ op.G.T - op.J @ op.J.T
    amax = float(np.abs(W).max())
    if op.d == 0:
        if op.k == 0:
            return 1.0, 1.0, amax
        sv = np.linalg.svd(op.G, compute_uv=False)
        smin = sv[-1] if op.k >= op.m else 0.0
        return float(1.0 + smin**2), float(1.0 + sv[0]**2), amax
    ev = np.linalg.eigvalsh(W)
    return float(ev[0]), float(ev[-1]), amax


# ---------------------------------------------------------------------------
# strategy objects used by the IPM


@dataclass(frozen=True)
class DirectionStrategy:
    """Choice of linear solver for the normal equations.

    ``bind(A)`` performs the one-time analysis (column partition, ordering,
    symbolic factorization) and returns a :class:`NormalSolver`.  With
    ``strict_residual`` a failed residual check raises
    :class:`StrategyError`; otherwise it is only counted.
    """

    variant: str = "proposed"
    policy: DensityPolicy = field(default_factory=DensityPolicy)
    cg_tol: float = 1e-8
    cg_max_iter: int = 200
    strict_residual: bool = False

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}; expected one of {VARIANTS}")
        if not self.cg_tol > 0:
            raise DomainError("cg_tol must be positive")
        if self.cg_max_iter < 1:
            raise DomainError("cg_max_iter must be at least 1")

    def bind(self, A: SparseMatrix) -> "NormalSolver":
        if self.variant == "full":
            return FullSolver(A, self)
        if self.variant == "smw":
            return SmwSolver(A, self)
        return ProposedSolver(A, self)


class NormalSolver:
    """Base class: factor for a scaling, then solve for any number of rhs.

    ``residual_failures`` counts solves whose normal-equations residual
    exceeded ``10 cg_tol ||q||``; ``worst_residual`` is the largest relative
    residual seen.
    """

    def __init__(self, A: SparseMatrix, strategy: DirectionStrategy, partition: ColumnPartition):
        self.A = A
        self.strategy = strategy
        self.partition = partition
        self._A_sq = A.to_scipy().multiply(A.to_scipy()).tocsr()
        self.lam = None
        self.residual_failures = 0
        self.worst_residual = 0.0

    @property
    def ndense(self):
        return self.partition.k

    @property
    def d(self) -> int:
        """Number of regularized pivots in the current factor."""
        return 0

    def max_normal_entry(self) -> float:
        """``max |(A Lam A^T)_ij|``, attained on the diagonal."""
        return float((self._A_sq @ self.lam).max()) if self.A.nrows else 0.0

    def max_w_entry(self) -> float:
        return float("nan")

    def factorize(self, lam):
        self.lam = np.asarray(lam, dtype=np.float64)

    def solve(self, q):
        """Return ``(dy, cg_iterations)``."""
        raise NotImplementedError

    def _record(self, ok, rel):
        self.worst_residual = max(self.worst_residual, rel)
        if not ok:
            if self.strategy.strict_residual:
                raise StrategyError(f"normal-equations relative residual {rel:.2e} exceeds "
                                    f"{RESIDUAL_FACTOR * self.strategy.cg_tol:.0e}")
            self.residual_failures += 1


class ProposedSolver(NormalSolver):
    def __init__(self, A, strategy):
        part = detect_dense(A, strategy.policy)
        super().__init__(A, strategy, part)
        self.S = A.select_columns(part.sparse_idx)
        self.D = A.select_columns(part.dense_idx).to_dense()
        self.factorizer = SparseFactorizer(self.S)
        self.op = None

    @property
    def d(self):
        return self.op.d if self.op is not None else 0

    def factorize(self, lam):
        super().factorize(lam)
        p = self.partition
        self.op = build_w_operator(self.S, self.D, self.lam[p.sparse_idx], self.lam[p.dense_idx],
                                   factorizer=self.factorizer)

    def max_w_entry(self):
        return self.op.max_abs_entry()

    def solve(self, q):
        dy, its, ok, rel = proposed_solve_checked(self.op, q, self.strategy.cg_tol,
                                                  self.strategy.cg_max_iter)
        self._record(ok, rel)
        return dy, its


class SmwSolver(ProposedSolver):
    def max_w_entry(self):
        return float("nan")

    def solve(self, q):
        dy, ok, rel = smw_solve_checked(self.op, q, self.strategy.cg_tol)
        self._record(ok, rel)
        # a direct solve has no fallback, so a bad direction ends the run
        if not ok:
            raise StrategyError(f"Woodbury solve relative residual {rel:.2e} is too large")
        return dy, 0


class FullSolver(NormalSolver):
    def __init__(self, A, strategy):
        thr = A.nrows + 1
        part = ColumnPartition(Permutation.identity(A.ncols), np.arange(A.ncols),
                               np.zeros(0, dtype=np.int64), thr)
        super().__init__(A, strategy, part)
        self.factorizer = SparseFactorizer(A)
        self.f = None

    @property
    def d(self):
        return self.f.d if self.f is not None else 0

    def factorize(self, lam):
        super().factorize(lam)
        self.f = self.factorizer.factor(self.lam)

    def solve(self, q):
        q = np.asarray(q, dtype=np.float64)
        dy = _full_solve(self.f, q)
        Asc = self.A.csc
        rn = float(np.linalg.norm(Asc @ (self.lam * (Asc.T @ dy)) - q))
        qn = float(np.linalg.norm(q))
        rel = rn / qn if qn > 0 else 0.0
        self._record(rel <= RESIDUAL_FACTOR * self.strategy.cg_tol, rel)
        return dy, 0
