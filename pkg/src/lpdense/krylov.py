"""Matrix-free conjugate gradient."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, DomainError, LpDenseError

# the recurrence residual drifts from the true one; resync this often
TRUE_RESIDUAL_EVERY = 50


class OperatorError(LpDenseError):
    """CG met a non-positive curvature or NaN: the operator is not SPD."""


@dataclass(frozen=True)
class CgReport:
    iterations: int
    final_rel_residual: float
    converged: bool


def conjugate_gradient(apply, rhs, x0=None, tol=1e-8, max_iter=200):
    """Solve ``A x = rhs`` for a symmetric positive definite operator.

    Parameters
    ----------
    apply : callable
        ``apply(v)`` returns ``A v``.
    rhs : ndarray, shape (m,)
    x0 : ndarray, optional
        Starting point, zero by default.
    tol : float
        Stop once ``||rhs - A x|| <= tol * ||rhs||``.
    max_iter : int

    Returns
    -------
    x : ndarray
        The last iterate (the best available one if not converged).
    report : CgReport

    Raises
    ------
    OperatorError
        If the recurrence produces NaN or a non-positive ``p^T A p``.
    """
    if tol <= 0:
        raise DomainError("tol must be positive")
    b = np.asarray(rhs, dtype=np.float64)
    m = b.shape[0]
    x = np.zeros(m) if x0 is None else np.array(x0, dtype=np.float64)
    if x.shape != (m,):
        raise DimensionError("x0 and rhs lengths differ")
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return np.zeros(m), CgReport(0, 0.0, True)
    r = b - apply(x) if x0 is not None else b.copy()
    rr = r @ r
    target = (tol * bnorm) ** 2
    if rr <= target:
        return x, CgReport(0, np.sqrt(rr) / bnorm, True)
    p = r.copy()
    it = 0
    while it < max_iter:
        Ap = apply(p)
        pAp = p @ Ap
        if not np.isfinite(pAp) or pAp <= 0.0:
            raise OperatorError(f"non-positive curvature {pAp!r} at CG iteration {it}")
        alpha = rr / pAp
        x += alpha * p
        it += 1
        if it % TRUE_RESIDUAL_EVERY == 0:
            r = b - apply(x)
        else:
            r -= alpha * Ap
        rr_new = r @ r
        if not np.isfinite(rr_new):
            raise OperatorError(f"NaN residual at CG iteration {it}")
        if rr_new <= target:
            rr = rr_new
            break
        p *= rr_new / rr
        p += r
        rr = rr_new
    rel = np.sqrt(rr) / bnorm
    return x, CgReport(it, float(rel), bool(rr <= target))
