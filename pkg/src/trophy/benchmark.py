"""Solver-by-problem grids, performance ratios and performance profiles."""

from __future__ import annotations

import csv
import logging
import math
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .oracle import COST_MODELS, EvalLedger, UsageError, adjusted_calls, ledger_rows, LEDGER_COLUMNS
from .problems import ProblemSpec, get_problem
from .solver import EVAL_FAILURE, FIRST_ORDER, SolverConfig, solve

__all__ = [
    "RunRecord",
    "ProfileCurve",
    "performance_ratios",
    "ratio_matrix",
    "performance_profile",
    "default_tau_grid",
    "run_grid",
    "metric_value",
    "write_runs_csv",
    "write_profiles_csv",
    "write_ledger_csv",
    "summarize",
    "METRICS",
    "RUN_COLUMNS",
]

log = logging.getLogger(__name__)

# metric name -> how it is read off a record
METRICS = ("adj_linear", "adj_quadratic", "adj_paper_linear", "adj_paper_quadratic", "iterations", "gnorm")
_ADJ_MODELS = {
    "adj_linear": "linear",
    "adj_quadratic": "quadratic",
    "adj_paper_linear": "paper-linear",
    "adj_paper_quadratic": "paper-quadratic",
}

RUN_COLUMNS = (
    "problem",
    "solver",
    "status",
    "iterations",
    "f_final",
    "gnorm_final",
    "adj_linear",
    "adj_quadratic",
    "adj_paper_linear",
    "adj_paper_quadratic",
    "f_calls",
    "g_calls",
    "final_bits",
)


@dataclass
class RunRecord:
    problem: str
    solver: str
    status: str
    iterations: int
    f_final: float
    gnorm_final: float
    ledger: EvalLedger
    adjusted: dict[str, float | None] = field(default_factory=dict)
    final_bits: int | None = None

    @property
    def solved(self) -> bool:
        return self.status == FIRST_ORDER


@dataclass
class ProfileCurve:
    solver: str
    tau_grid: np.ndarray
    h_values: np.ndarray

    def __call__(self, tau: float) -> float:
        """Step-function value at an arbitrary ``tau`` (must be >= 1)."""
        i = np.searchsorted(self.tau_grid, tau, side="right") - 1
        return float(self.h_values[max(i, 0)])


def _adjusted_table(ledger: EvalLedger) -> dict[str, float | None]:
    out = {}
    for metric, model in _ADJ_MODELS.items():
        try:
            out[metric] = adjusted_calls(ledger, COST_MODELS[model])
        except UsageError:
            # table models only price 11/24/53-bit levels
            out[metric] = None
    return out


def metric_value(record: RunRecord, metric: str) -> float:
    """Value entering the performance ratio; ``+inf`` for unsolved runs.

    Exact zeros (a gradient that vanished identically) are raised to the
    smallest normal double so ratios stay defined.
    """
    if metric not in METRICS:
        raise UsageError(f"unknown metric {metric!r}")
    if not record.solved:
        return math.inf
    if metric == "iterations":
        v = float(record.iterations)
    elif metric == "gnorm":
        v = record.gnorm_final
    else:
        v = record.adjusted.get(metric)
        if v is None:
            return math.inf
    return max(v, np.finfo(float).tiny)


def ratio_matrix(values) -> np.ndarray:
    """Performance ratios for a ``problems x solvers`` array of metric values.

    ``+inf`` marks a failure.  Rows where every solver failed stay all
    ``+inf``.

    >>> ratio_matrix([[10, 20], [5, np.inf]]).tolist()
    [[1.0, 2.0], [1.0, inf]]
    """
    v = np.asarray(values, dtype=np.float64)
    if v.ndim != 2 or v.size == 0:
        raise UsageError("need a non-empty problems x solvers table")
    if np.any(np.isnan(v)) or np.any(v <= 0):
        raise UsageError("metric values must be positive or +inf")
    best = v.min(axis=1, keepdims=True)
    with np.errstate(invalid="ignore"):
        r = v / best
    r[~np.isfinite(best.ravel())] = np.inf
    return r


def performance_ratios(records: Sequence[RunRecord], metric: str,
                       solvers: Sequence[str] | None = None) -> tuple[list[str], list[str], np.ndarray]:
    """Group ``records`` by problem and return ``(problems, solvers, ratios)``."""
    if not records:
        raise UsageError("no run records")
    if solvers is None:
        solvers = sorted({r.solver for r in records})
    problems = sorted({r.problem for r in records})
    index = {(r.problem, r.solver): r for r in records}
    values = np.full((len(problems), len(solvers)), np.inf)
    for i, p in enumerate(problems):
        for j, s in enumerate(solvers):
            rec = index.get((p, s))
            if rec is None:
                raise UsageError(f"missing run for problem {p!r}, solver {s!r}")
            values[i, j] = metric_value(rec, metric)
    return problems, list(solvers), ratio_matrix(values)


def default_tau_grid(points: int = 200, max_log2: float = 10.0) -> np.ndarray:
    """Log-spaced grid from 1 to ``2**max_log2``."""
    return np.logspace(0.0, max_log2, points, base=2.0)


def performance_profile(ratios, solvers: Sequence[str], tau_grid=None) -> list[ProfileCurve]:
    """Fraction of problems each solver handles within a factor ``tau`` of the best."""
    r = np.asarray(ratios, dtype=np.float64)
    if r.ndim != 2 or r.shape[0] == 0:
        raise UsageError("empty ratio table")
    if r.shape[1] != len(solvers):
        raise UsageError("one solver name per ratio column required")
    tau = default_tau_grid() if tau_grid is None else np.asarray(tau_grid, dtype=np.float64)
    if tau.size == 0 or tau[0] != 1.0 or np.any(np.diff(tau) <= 0):
        raise UsageError("tau grid must start at 1 and increase")
    n_problems = r.shape[0]
    curves = []
    for j, name in enumerate(solvers):
        counts = (r[:, j][None, :] <= tau[:, None]).sum(axis=1)
        curves.append(ProfileCurve(name, tau.copy(), counts / n_problems))
    return curves


# ---------------------------------------------------------------------------
# grid execution
# ---------------------------------------------------------------------------


def _run_one(problem: ProblemSpec, solver: str, config: SolverConfig) -> RunRecord:
    try:
        res = solve(problem, config)
    except Exception as exc:  # a single failed cell must not sink the grid
        log.warning("%s/%s crashed: %s", problem.name, solver, exc)
        ledger = EvalLedger(config.hierarchy.bits)
        return RunRecord(problem.name, solver, EVAL_FAILURE, 0, math.nan, math.nan, ledger,
                         _adjusted_table(ledger), None)
    return RunRecord(
        problem=problem.name,
        solver=solver,
        status=res.status,
        iterations=res.iterations,
        f_final=res.f_final,
        gnorm_final=res.gnorm_final,
        ledger=res.ledger,
        adjusted=_adjusted_table(res.ledger),
        final_bits=res.hierarchy.bits[res.final_level],
    )


def _run_named(args: tuple[str, str, SolverConfig]) -> RunRecord:
    name, solver, config = args
    return _run_one(get_problem(name), solver, config)


def run_grid(problems: Iterable[ProblemSpec], solver_configs: Mapping[str, SolverConfig],
             jobs: int = 1) -> list[RunRecord]:
    """Solve every problem with every configuration.

    Records come back sorted by ``(problem, solver)`` whatever the
    completion order.  ``jobs > 1`` runs cells in worker processes; this
    needs problems from the built-in suite.
    """
    problems = list(problems)
    cells = [(p, s, c) for p in problems for s, c in solver_configs.items()]
    if jobs > 1 and all(_in_suite(p) for p in problems):
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            records = list(pool.map(_run_named, [(p.name, s, c) for p, s, c in cells]))
    else:
        records = [_run_one(p, s, c) for p, s, c in cells]
    return sorted(records, key=lambda r: (r.problem, r.solver))


def _in_suite(problem: ProblemSpec) -> bool:
    try:
        return get_problem(problem.name) is problem
    except KeyError:
        return False


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return f"{v:.17g}"
    return str(v)


def write_runs_csv(path, records: Sequence[RunRecord]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(RUN_COLUMNS)
        for r in records:
            writer.writerow([
                r.problem,
                r.solver,
                r.status,
                r.iterations,
                _fmt(r.f_final),
                _fmt(r.gnorm_final),
                *(_fmt(r.adjusted.get(m)) for m in _ADJ_MODELS),
                r.ledger.total_f,
                r.ledger.total_g,
                _fmt(r.final_bits),
            ])


def write_profiles_csv(path, curves: Sequence[ProfileCurve]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(("solver", "tau", "h"))
        for c in curves:
            for t, h in zip(c.tau_grid, c.h_values):
                writer.writerow((c.solver, _fmt(float(t)), _fmt(float(h))))


def write_ledger_csv(path, records: Sequence[RunRecord]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=LEDGER_COLUMNS, lineterminator="\n")
        writer.writeheader()
        for r in records:
            writer.writerows(ledger_rows(r.problem, r.solver, r.ledger))


def summarize(records: Sequence[RunRecord], solvers: Sequence[str] | None = None,
              metric: str = "adj_linear") -> list[dict]:
    """Per solver: number solved and median ``metric`` over its solved runs."""
    if solvers is None:
        solvers = sorted({r.solver for r in records})
    rows = []
    for s in solvers:
        mine = [r for r in records if r.solver == s]
        vals = [metric_value(r, metric) for r in mine if r.solved]
        vals = [v for v in vals if math.isfinite(v)]
        rows.append({
            "solver": s,
            "solved": sum(r.solved for r in mine),
            "runs": len(mine),
            "median": statistics.median(vals) if vals else math.nan,
        })
    return rows
