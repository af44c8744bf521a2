"""Mehrotra predictor-corrector interior point method with upper bounds.

Primal variables are ``x >= 0`` and the upper-bound slacks ``v >= 0`` on the
bounded set; the dual has ``y`` free, ``z >= 0`` and ``w >= 0``.  The Newton
system at an iterate is::

    A dx                 = r_b
    A^T dy + dz - E^T dw = r_c
    E dx + dv            = r_u
    Z dx + X dz          = r_xz
    W dv + V dw          = r_wv

where ``E`` selects the bounded components.  Eliminating everything but
``dy`` leaves ``A Lam A^T dy = q`` with ``Lam = (X^{-1} Z + E^T V^{-1} W E)^{-1}``.
"""
from __future__ import annotations

import enum
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import LpDenseError, ModelError, StrategyError
from .model import StandardLp
from .sparse import spmv
from .strategies import DirectionStrategy, NormalSolver

SIGMA_MIN = 1e-8


class Termination(str, enum.Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    UNKNOWN = "Unknown"
    ITER_LIMIT = "IterLimit"

    def __str__(self):
        return self.value


@dataclass
class Iterate:
    """Primal-dual point; ``v`` and ``w`` live on ``lp.upper_idx``."""

    x: np.ndarray
    v: np.ndarray
    y: np.ndarray
    z: np.ndarray
    w: np.ndarray

    def copy(self):
        return Iterate(self.x.copy(), self.v.copy(), self.y.copy(), self.z.copy(), self.w.copy())

    def is_interior(self):
        return bool(np.all(self.x > 0) and np.all(self.z > 0)
                    and np.all(self.v > 0) and np.all(self.w > 0))


@dataclass
class Residuals:
    r_b: np.ndarray
    r_c: np.ndarray
    r_u: np.ndarray
    r_xz: np.ndarray
    r_wv: np.ndarray


@dataclass
class Direction:
    dx: np.ndarray
    dv: np.ndarray
    dy: np.ndarray
    dz: np.ndarray
    dw: np.ndarray

    def __add__(self, other):
        return Direction(self.dx + other.dx, self.dv + other.dv, self.dy + other.dy,
                         self.dz + other.dz, self.dw + other.dw)


@dataclass
class IterationRecord:
    """What the progress callback receives after each iteration."""

    iteration: int
    mu: float
    primal_infeasibility: float
    dual_infeasibility: float
    cg_predictor: int
    cg_corrector: int
    max_w_entry: float
    alpha_p: float
    alpha_d: float


@dataclass
class SolveOptions:
    """Tolerances and limits.

    ``mu_target``, when set, adds ``mu <= mu_target`` to the stopping test,
    which drives a run deeper than the relative tolerances alone.
    ``direction_hook(kind, iterate, residuals, direction)`` sees every
    predictor, corrector and combined direction; meant for instrumentation.
    """

    tol_feas: float = 1e-8
    tol_opt: float = 1e-8
    max_iter: int = 200
    stall: int = 5
    tau: float = 0.9995
    time_limit: float | None = None
    mu_target: float | None = None
    start_floor: float = 1.0
    callback: Callable | None = None
    direction_hook: Callable | None = None


@dataclass
class SolveStats:
    ipm_iterations: int = 0
    cg_iters_predictor: list = field(default_factory=list)
    cg_iters_corrector: list = field(default_factory=list)
    max_w_entry: list = field(default_factory=list)
    max_normal_entry: list = field(default_factory=list)
    mu: list = field(default_factory=list)
    regularized_pivots: list = field(default_factory=list)
    wall_time: float = 0.0
    termination: Termination = Termination.UNKNOWN
    message: str = ""
    objective: float = float("nan")
    primal_infeasibility: float = float("nan")
    dual_infeasibility: float = float("nan")
    relative_gap: float = float("nan")
    ndense: int = 0
    residual_check_failures: int = 0
    worst_normal_residual: float = 0.0

    @property
    def total_cg(self):
        return int(sum(self.cg_iters_predictor) + sum(self.cg_iters_corrector))

    @property
    def mean_cg_predictor(self):
        return float(np.mean(self.cg_iters_predictor)) if self.cg_iters_predictor else 0.0

    @property
    def mean_cg_corrector(self):
        return float(np.mean(self.cg_iters_corrector)) if self.cg_iters_corrector else 0.0


# ---------------------------------------------------------------------------
# building blocks


def duality_gap(it: Iterate) -> float:
    """``mu = (<x, z> + <w, v>) / (2 n)``."""
    n = it.x.size
    return float((it.x @ it.z + it.w @ it.v) / (2 * n))


def residuals(lp: StandardLp, it: Iterate, mu_target: float) -> Residuals:
    u_idx = lp.upper_idx
    r_b = lp.b - spmv(lp.A, it.x)
    r_c = lp.c - spmv(lp.A, it.y, transpose=True) - it.z
    r_c[u_idx] += it.w
    r_u = lp.upper[u_idx] - it.x[u_idx] - it.v
    r_xz = mu_target - it.x * it.z
    r_wv = mu_target - it.v * it.w
    return Residuals(r_b, r_c, r_u, r_xz, r_wv)


def scaling(lp: StandardLp, it: Iterate) -> np.ndarray:
    """Diagonal of ``Lam = (X^{-1} Z + V^{-1} W)^{-1}``, the second term on the bounded set."""
    ratio = it.z / it.x
    ratio[lp.upper_idx] += it.w / it.v
    return 1.0 / ratio


def _reduced_rc(lp, it, res):
    u_idx = lp.upper_idx
    rc = res.r_c - res.r_xz / it.x
    rc[u_idx] += (res.r_wv - it.w * res.r_u) / it.v
    return rc


def normal_rhs(lp: StandardLp, it: Iterate, res: Residuals, lam=None) -> np.ndarray:
    """``q = r_b + A Lam rbar_c``."""
    lam = scaling(lp, it) if lam is None else lam
    return res.r_b + spmv(lp.A, lam * _reduced_rc(lp, it, res))


def recover_direction(lp: StandardLp, it: Iterate, res: Residuals, dy, lam=None) -> Direction:
    """Back-substitute ``dy`` into the eliminated Newton equations."""
    lam = scaling(lp, it) if lam is None else lam
    u_idx = lp.upper_idx
    dy = np.asarray(dy, dtype=np.float64)
    dx = lam * (spmv(lp.A, dy, transpose=True) - _reduced_rc(lp, it, res))
    dv = res.r_u - dx[u_idx]
    dz = (res.r_xz - it.z * dx) / it.x
    dw = (res.r_wv - it.w * dv) / it.v
    return Direction(dx, dv, dy, dz, dw)


def newton_residuals(lp: StandardLp, it: Iterate, res: Residuals, d: Direction):
    """Residuals of the five Newton equations at ``d`` and the block rhs norms."""
    u_idx = lp.upper_idx
    e1 = spmv(lp.A, d.dx) - res.r_b
    e2 = spmv(lp.A, d.dy, transpose=True) + d.dz - res.r_c
    e2[u_idx] -= d.dw
    e3 = d.dx[u_idx] + d.dv - res.r_u
    e4 = it.z * d.dx + it.x * d.dz - res.r_xz
    e5 = it.w * d.dv + it.v * d.dw - res.r_wv
    errs = [float(np.linalg.norm(e)) for e in (e1, e2, e3, e4, e5)]
    rhs = [float(np.linalg.norm(r)) for r in (res.r_b, res.r_c, res.r_u, res.r_xz, res.r_wv)]
    return errs, rhs


def _ratio(vals, steps):
    neg = steps < 0
    if not np.any(neg):
        return np.inf
    return float(np.min(-vals[neg] / steps[neg]))


def step_lengths(it: Iterate, d: Direction, tau=0.9995):
    """Damped ratio test, separately for ``(x, v)`` and ``(z, w)``."""
    if not 0 < tau <= 1:
        raise ValueError("tau must lie in (0, 1]")
    ap = min(1.0, tau * min(_ratio(it.x, d.dx), _ratio(it.v, d.dv)))
    ad = min(1.0, tau * min(_ratio(it.z, d.dz), _ratio(it.w, d.dw)))
    return ap, ad


def centering_sigma(it: Iterate, pred: Direction, alpha_p, alpha_d) -> float:
    """``sigma = (gap after the predictor step / current gap)^3``, clipped to [1e-8, 1]."""
    gap = it.x @ it.z + it.w @ it.v
    trial = ((it.x + alpha_p * pred.dx) @ (it.z + alpha_d * pred.dz)
             + (it.w + alpha_d * pred.dw) @ (it.v + alpha_p * pred.dv))
    if gap <= 0:
        return 1.0
    return float(np.clip((trial / gap) ** 3, SIGMA_MIN, 1.0))


def corrector_rhs(it: Iterate, pred: Direction, sigma, mu) -> Residuals:
    m, n, nu = it.y.size, it.x.size, it.v.size
    return Residuals(np.zeros(m), np.zeros(n), np.zeros(nu),
                     sigma * mu - pred.dx * pred.dz, sigma * mu - pred.dv * pred.dw)


def initial_point(lp: StandardLp, solver: NormalSolver | None = None, floor=1.0) -> Iterate:
    """Mehrotra's starting point, extended to upper bounds.

    Least-squares estimates ``x = A^T (A A^T)^{-1} b`` and
    ``y = (A A^T)^{-1} A c``, ``s = c - A^T y`` are computed with the given
    solver at unit scaling.  On bounded columns the reduced cost ``s`` is
    split as ``z - w`` and ``v = u - x``.  Each block is then shifted to be
    positive, recentred, and finally floored at ``floor``.

    Raises
    ------
    ModelError
        If ``A A^T`` cannot be solved with, which means ``A`` is rank
        deficient.
    """
    if solver is None:
        solver = DirectionStrategy("full").bind(lp.A)
    m, n = lp.shape
    u_idx = lp.upper_idx
    try:
        solver.factorize(np.ones(n))
        t, _ = solver.solve(lp.b)
        x = spmv(lp.A, t, transpose=True)
        y, _ = solver.solve(spmv(lp.A, lp.c))
    except (StrategyError, LpDenseError) as exc:
        raise ModelError(f"A A^T could not be solved with: {exc}") from exc
    s = lp.c - spmv(lp.A, y, transpose=True)
    v = lp.upper[u_idx] - x[u_idx]
    z = s.copy()
    w = np.zeros(u_idx.size)
    su = s[u_idx]
    z[u_idx] = np.maximum(su, 0.0)
    w = np.maximum(-su, 0.0)

    prim = np.concatenate([x, v])
    dual = np.concatenate([z, w])
    dp = max(-1.5 * prim.min(), 0.0) if prim.size else 0.0
    dd = max(-1.5 * dual.min(), 0.0) if dual.size else 0.0
    prim = prim + dp
    dual = dual + dd
    xz = prim @ dual
    if prim.sum() > 0 and dual.sum() > 0:
        prim = prim + 0.5 * xz / dual.sum()
        dual = dual + 0.5 * xz / prim.sum()
    prim = np.maximum(prim, floor)
    dual = np.maximum(dual, floor)
    return Iterate(prim[:n], prim[n:], y, dual[:n], dual[n:])


def _compute_direction(lp, it, res, lam, solver):
    q = normal_rhs(lp, it, res, lam)
    dy, cg = solver.solve(q)
    return recover_direction(lp, it, res, dy, lam), cg


def _measures(lp, it, res):
    bnorm = 1.0 + max(np.linalg.norm(lp.b), np.linalg.norm(lp.upper_values()) if lp.upper_idx.size else 0.0)
    pinf = max(np.linalg.norm(res.r_b), np.linalg.norm(res.r_u) if res.r_u.size else 0.0) / bnorm
    dinf = np.linalg.norm(res.r_c) / (1.0 + np.linalg.norm(lp.c))
    pobj = float(lp.c @ it.x)
    comp = float(it.x @ it.z + it.w @ it.v)
    gap = comp / (1.0 + abs(pobj))
    return float(pinf), float(dinf), float(gap)


# ---------------------------------------------------------------------------
# main loop


def solve(lp: StandardLp, strategy: DirectionStrategy | None = None, opts: SolveOptions | None = None,
          start: Iterate | None = None):
    """Run the predictor-corrector method.

    Parameters
    ----------
    lp : StandardLp
    strategy : DirectionStrategy, optional
        Defaults to the proposed preconditioned strategy.
    opts : SolveOptions, optional
    start : Iterate, optional
        Starting point; computed by :func:`initial_point` when omitted.

    Returns
    -------
    iterate : Iterate or None
        The last iterate; None when no starting point could be computed.
    stats : SolveStats
    """
    strategy = DirectionStrategy() if strategy is None else strategy
    opts = SolveOptions() if opts is None else opts
    stats = SolveStats()
    t0 = time.perf_counter()
    solver = strategy.bind(lp.A)
    stats.ndense = solver.ndense
    try:
        it = initial_point(lp, solver, opts.start_floor) if start is None else start.copy()
    except ModelError as exc:
        stats.termination, stats.message = Termination.UNKNOWN, f"starting point failed: {exc}"
        stats.wall_time = time.perf_counter() - t0
        return None, stats
    n = lp.n
    hook = opts.direction_hook
    best_phi = np.inf
    mu_up = 0
    prev_mu = duality_gap(it)
    mu0 = prev_mu
    k = 0
    status, message = None, ""
    while True:
        mu = duality_gap(it)
        res = residuals(lp, it, 0.0)
        pinf, dinf, gap = _measures(lp, it, res)
        stats.primal_infeasibility, stats.dual_infeasibility, stats.relative_gap = pinf, dinf, gap
        if (pinf <= opts.tol_feas and dinf <= opts.tol_feas and gap <= opts.tol_opt
                and (opts.mu_target is None or mu <= opts.mu_target)):
            status = Termination.OPTIMAL
            break
        phi = pinf + dinf + gap
        best_phi = min(best_phi, phi)
        if k > 0 and phi > 1e-8 and phi > 1e5 * best_phi:
            status, message = Termination.INFEASIBLE, "residuals diverged"
            break
        if k > 0 and mu <= 1e-12 * mu0 and max(pinf, dinf) > 1e-6:
            status, message = Termination.INFEASIBLE, "complementarity vanished while infeasibility persists"
            break
        if k >= opts.max_iter:
            status, message = Termination.ITER_LIMIT, f"{opts.max_iter} iterations"
            break
        if opts.time_limit is not None and time.perf_counter() - t0 > opts.time_limit:
            status, message = Termination.ITER_LIMIT, f"time limit {opts.time_limit:g} s"
            break

        lam = scaling(lp, it)
        try:
            solver.factorize(lam)
            pred, cg_p = _compute_direction(lp, it, res, lam, solver)
            ap, ad = step_lengths(it, pred, 1.0)
            sigma = centering_sigma(it, pred, ap, ad)
            cres = corrector_rhs(it, pred, sigma, mu)
            corr, cg_c = _compute_direction(lp, it, cres, lam, solver)
        except (StrategyError, LpDenseError) as exc:
            status, message = Termination.UNKNOWN, f"direction failed: {exc}"
            break
        d = pred + corr
        if hook is not None:
            hook("predictor", it, res, pred)
            hook("corrector", it, cres, corr)
        if not all(np.all(np.isfinite(a)) for a in (d.dx, d.dy, d.dz, d.dv, d.dw)):
            status, message = Termination.UNKNOWN, "non-finite direction"
            break
        ap, ad = step_lengths(it, d, opts.tau)
        it = Iterate(it.x + ap * d.dx, it.v + ap * d.dv, it.y + ad * d.dy,
                     it.z + ad * d.dz, it.w + ad * d.dw)
        k += 1
        stats.cg_iters_predictor.append(int(cg_p))
        stats.cg_iters_corrector.append(int(cg_c))
        stats.max_w_entry.append(solver.max_w_entry())
        stats.max_normal_entry.append(solver.max_normal_entry())
        stats.regularized_pivots.append(solver.d)
        new_mu = duality_gap(it)
        stats.mu.append(new_mu)
        if opts.callback is not None:
            r = residuals(lp, it, 0.0)
            p2, d2, _ = _measures(lp, it, r)
            opts.callback(IterationRecord(k, new_mu, p2, d2, int(cg_p), int(cg_c),
                                          stats.max_w_entry[-1], ap, ad))
        mu_up = mu_up + 1 if new_mu > prev_mu else 0
        prev_mu = new_mu
        if mu_up >= opts.stall:
            status, message = Termination.UNKNOWN, f"mu increased {opts.stall} times in a row"
            break
    stats.ipm_iterations = k
    stats.residual_check_failures = solver.residual_failures
    stats.worst_normal_residual = solver.worst_residual
    stats.termination = status
    stats.message = message
    stats.objective = lp.objective(it.x)
    stats.wall_time = time.perf_counter() - t0
    return it, stats
