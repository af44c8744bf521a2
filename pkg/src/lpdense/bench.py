"""Run records, CSV round trips and performance profiles."""
from __future__ import annotations

import csv
import dataclasses
import io
import math
from dataclasses import dataclass

import numpy as np

from .errors import LpDenseError
from .ipm import SolveOptions, SolveStats, solve
from .model import DensityPolicy, StandardLp, scale_lp
from .strategies import DirectionStrategy

SCHEMA = "runrecord.v1"
ERROR = "Error"


@dataclass
class RunRecord:
    """One (problem, strategy) result; a flat mirror of :class:`SolveStats`.

    ``d`` is the largest number of regularized pivots seen in any
    factorization.  ``termination`` is a :class:`Termination` value, or
    ``"Error"`` when the problem could not be loaded.
    """

    problem: str
    strategy: str
    m: int = 0
    n: int = 0
    nnz: int = 0
    ndense: int = 0
    d: int = 0
    ipm_iterations: int = 0
    wall_time: float = 0.0
    total_cg: int = 0
    mean_cg_predictor: float = 0.0
    mean_cg_corrector: float = 0.0
    termination: str = ERROR
    objective: float = math.nan
    message: str = ""

    @classmethod
    def from_stats(cls, problem, strategy, lp: StandardLp, stats: SolveStats) -> "RunRecord":
        return cls(problem, strategy, lp.m, lp.n, lp.A.nnz, stats.ndense,
                   max(stats.regularized_pivots, default=0), stats.ipm_iterations, stats.wall_time,
                   stats.total_cg, stats.mean_cg_predictor, stats.mean_cg_corrector,
                   stats.termination.value, stats.objective, stats.message)

    @property
    def optimal(self) -> bool:
        return self.termination == "Optimal"

    def text(self) -> str:
        """Human-readable summary with 6 significant digits."""
        lines = [f"problem      {self.problem}",
                 f"strategy     {self.strategy}",
                 f"size         m={self.m} n={self.n} nnz={self.nnz} ndense={self.ndense} d={self.d}",
                 f"termination  {self.termination}" + (f" ({self.message})" if self.message else ""),
                 f"objective    {self.objective:.6g}",
                 f"iterations   {self.ipm_iterations}",
                 f"wall time    {self.wall_time:.6g} s",
                 f"cg           total={self.total_cg} mean_pred={self.mean_cg_predictor:.6g} "
                 f"mean_corr={self.mean_cg_corrector:.6g}"]
        return "\n".join(lines)


FIELDS = [f.name for f in dataclasses.fields(RunRecord)]
HEADER = ["schema"] + FIELDS
_TYPES = {f.name: f.type for f in dataclasses.fields(RunRecord)}


def _fmt(v):
    if isinstance(v, float):
        return format(v, ".17g")
    return str(v)


def write_records(records, stream) -> None:
    """Write records as CSV (header row first, LF line endings)."""
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(HEADER)
    for r in records:
        w.writerow([SCHEMA] + [_fmt(getattr(r, k)) for k in FIELDS])


def records_to_csv(records) -> str:
    buf = io.StringIO()
    write_records(records, buf)
    return buf.getvalue()


def read_records(stream) -> list[RunRecord]:
    """Parse CSV written by :func:`write_records`.

    Raises
    ------
    LpDenseError
        On a wrong header, schema id or field, naming the 1-based row.
    """
    rows = csv.reader(stream)
    header = next(rows, None)
    if header != HEADER:
        raise LpDenseError(f"row 1: expected header {','.join(HEADER)}")
    out = []
    for lineno, row in enumerate(rows, start=2):
        if not row:
            continue
        if len(row) != len(HEADER):
            raise LpDenseError(f"row {lineno}: expected {len(HEADER)} fields, got {len(row)}")
        if row[0] != SCHEMA:
            raise LpDenseError(f"row {lineno}: unknown schema {row[0]!r}")
        vals = {}
        for k, s in zip(FIELDS, row[1:]):
            typ = _TYPES[k]
            try:
                vals[k] = int(s) if typ == "int" else float(s) if typ == "float" else s
            except ValueError:
                raise LpDenseError(f"row {lineno}: bad value {s!r} for {k}") from None
        out.append(RunRecord(**vals))
    return out


def run_one(problem: str, lp: StandardLp, variant: str, policy: DensityPolicy | None = None,
            opts: SolveOptions | None = None, *, cg_tol=1e-8, scale=True) -> tuple[RunRecord, SolveStats]:
    """Solve ``lp`` with one strategy and summarize the run.

    Scaling, when on, happens before the clock starts; the record keeps the
    dimensions of the problem as given.
    """
    work = scale_lp(lp) if scale else lp
    strategy = DirectionStrategy(variant, policy or DensityPolicy(), cg_tol=cg_tol)
    _, stats = solve(work, strategy, opts)
    return RunRecord.from_stats(problem, variant, lp, stats), stats


def performance_profile(records) -> dict[str, list[tuple[float, float]]]:
    """Step points ``(log2 ratio, fraction of problems)`` for each strategy.

    The ratio for a run is its wall time over the best time any strategy
    achieved on that problem; non-optimal runs get an infinite ratio and
    never enter the profile.  Each point marks where the cumulative
    fraction jumps.

    Raises
    ------
    LpDenseError
        If a (problem, strategy) pair appears twice.
    """
    times: dict[str, dict[str, float]] = {}
    strategies: list[str] = []
    for r in records:
        cell = times.setdefault(r.problem, {})
        if r.strategy in cell:
            raise LpDenseError(f"duplicate run for problem {r.problem!r}, strategy {r.strategy!r}")
        cell[r.strategy] = r.wall_time if r.optimal else math.inf
        if r.strategy not in strategies:
            strategies.append(r.strategy)
    nprob = len(times)
    ratios = {s: [] for s in strategies}
    for cell in times.values():
        best = min(cell.values())
        for s in strategies:
            t = cell.get(s, math.inf)
            if not math.isfinite(t):
                ratios[s].append(math.inf)
            elif t <= best:
                ratios[s].append(1.0)
            else:
                ratios[s].append(t / best)
    out = {}
    for s in sorted(strategies):
        r = np.sort(np.asarray(ratios[s]))
        finite = r[np.isfinite(r)]
        pts = []
        for v in np.unique(finite):
            pts.append((float(np.log2(v)), float(np.count_nonzero(r <= v) / nprob)))
        out[s] = pts
    return out


def profile_to_csv(profile) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["strategy", "log2_ratio", "fraction"])
    for s, pts in profile.items():
        for x, y in pts:
            w.writerow([s, _fmt(x), _fmt(y)])
    return buf.getvalue()
