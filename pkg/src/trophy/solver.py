"""Trust-region optimisation over a hierarchy of evaluation precisions.

The solver builds quadratic models from ``f^p`` and ``grad f^p`` at the
current level ``p`` and judges steps by the *estimated* reduction measured at
that same level.  On unsuccessful iterations a running estimate ``theta`` of
the precision-induced error in that reduction is compared against the
predicted reduction and a forcing sequence; when the comparison fails the
level is raised.  A one-level hierarchy reduces to a classical trust-region
method.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .lsr1 import CurvaturePairBuffer
from .oracle import EvalLedger, Oracle, PrecisionHierarchy
from .problems import ProblemSpec
from .subproblem import SubproblemFailure, steihaug_cg

__all__ = [
    "ForcingSequence",
    "SolverConfig",
    "SolverState",
    "IterationRecord",
    "StepInfo",
    "SolveResult",
    "EvaluationFailure",
    "solve",
    "classic_trust_region",
    "rho_observed",
    "theta_update",
    "precision_test",
    "check_termination",
    "HISTORY_COLUMNS",
    "RADIUS_FLOOR",
]

FIRST_ORDER = "first_order"
RADIUS_UNDERFLOW = "radius_underflow"
MAX_ITER = "max_iter"
EVAL_FAILURE = "eval_failure"
STATUSES = (FIRST_ORDER, RADIUS_UNDERFLOW, MAX_ITER, EVAL_FAILURE)

# double-precision machine epsilon
RADIUS_FLOOR = 2.0**-52


class EvaluationFailure(ArithmeticError):
    """A highest-precision evaluation came back non-finite."""


@dataclass(frozen=True)
class ForcingSequence:
    """Non-negative sequence ``r_k -> 0`` used by the precision test.

    ``geometric``: ``a * q**k``; ``harmonic``: ``a / (k + 1)``.
    """

    kind: str = "geometric"
    a: float = 10.0
    q: float = 0.9

    def __post_init__(self):
        if self.kind not in ("geometric", "harmonic"):
            raise ValueError(f"unknown forcing sequence {self.kind!r}")
        if self.a < 0:
            raise ValueError("forcing scale must be non-negative")
        if self.kind == "geometric" and not 0 <= self.q < 1:
            raise ValueError("geometric ratio must lie in [0, 1)")

    def __call__(self, k: int) -> float:
        if self.kind == "geometric":
            return self.a * self.q**k
        return self.a / (k + 1)


@dataclass(frozen=True)
class SolverConfig:
    hierarchy: PrecisionHierarchy = field(default_factory=lambda: PrecisionHierarchy.from_bits([53]))
    eta1: float = 0.1
    eta2: float = 0.75
    gamma_inc: float = 2.0
    gamma_dec: float = 0.5
    omega: float = 0.9
    forcing: ForcingSequence = field(default_factory=ForcingSequence)
    delta0: float = 1.0
    eps_tol: float = 1e-5
    max_iter: int = 5000
    lsr1_memory: int = 10
    reset_memory_on_switch: bool = False
    x0: tuple[float, ...] | None = None
    name: str = ""

    def __post_init__(self):
        if not isinstance(self.hierarchy, PrecisionHierarchy):
            object.__setattr__(self, "hierarchy", PrecisionHierarchy.from_bits(self.hierarchy))
        if self.x0 is not None:
            object.__setattr__(self, "x0", tuple(float(v) for v in self.x0))
        problems = []
        if not 0 < self.eta1 <= self.eta2 < 1:
            problems.append("need 0 < eta1 <= eta2 < 1")
        if not self.gamma_inc > 1:
            problems.append("gamma_inc must exceed 1")
        if not 0 < self.gamma_dec < 1:
            problems.append("gamma_dec must lie in (0, 1)")
        if not 0 < self.omega < 1:
            problems.append("omega must lie in (0, 1)")
        if not self.delta0 > 0:
            problems.append("delta0 must be positive")
        if not self.eps_tol > 0:
            problems.append("eps_tol must be positive")
        if self.max_iter < 0:
            problems.append("max_iter must be non-negative")
        if self.lsr1_memory < 1:
            problems.append("lsr1_memory must be positive")
        if problems:
            raise ValueError("invalid solver configuration: " + "; ".join(problems))

    @property
    def eta(self) -> float:
        return min(self.eta1, 1.0 - self.eta2)


@dataclass
class SolverState:
    x: np.ndarray
    delta: float
    p: int
    f_p: float
    g_p: np.ndarray
    buffer: CurvaturePairBuffer
    theta: float = 0.0
    failed_once: bool = False
    k: int = 0
    # last highest-precision gradient check: (x bytes, norm)
    confirmed: tuple[bytes, float] | None = None
    confirmations: int = 0


@dataclass
class IterationRecord:
    k: int
    p_bits: int
    delta: float
    rho_tilde: float
    pred: float
    success: bool
    f_est: float
    gnorm_est: float
    escalated: bool = False


HISTORY_COLUMNS = ("k", "p_bits", "delta", "rho_tilde", "pred", "success", "f_est", "gnorm_est")


@dataclass
class StepInfo:
    """Everything an observer needs to audit one iteration.

    ``hvp`` is the operator the subproblem was solved with; it is only valid
    during the observer call.
    """

    k: int
    p: int
    x: np.ndarray
    s: np.ndarray
    g: np.ndarray
    delta: float
    pred: float
    ered: float
    rho_tilde: float
    r_k: float
    success: bool
    theta: float
    test_held: bool | None
    escalated: bool
    termination: str
    hvp: Callable[[np.ndarray], np.ndarray]


@dataclass
class SolveResult:
    status: str
    x_final: np.ndarray
    f_final: float
    gnorm_final: float
    iterations: int
    ledger: EvalLedger
    history: list[IterationRecord]
    final_level: int
    hierarchy: PrecisionHierarchy
    counters: dict = field(default_factory=dict)

    @property
    def solved(self) -> bool:
        return self.status == FIRST_ORDER

    @property
    def level_trace(self) -> list[int]:
        return [rec.p_bits for rec in self.history]

    def write_history_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(HISTORY_COLUMNS)
            for rec in self.history:
                writer.writerow([
                    rec.k,
                    rec.p_bits,
                    f"{rec.delta:.17g}",
                    f"{rec.rho_tilde:.17g}",
                    f"{rec.pred:.17g}",
                    int(rec.success),
                    f"{rec.f_est:.17g}",
                    f"{rec.gnorm_est:.17g}",
                ])


# ---------------------------------------------------------------------------
# building blocks
# ---------------------------------------------------------------------------


def rho_observed(ered: float, pred: float) -> float:
    """``ered / pred``, or ``-inf`` when the ratio is meaningless."""
    if not (math.isfinite(ered) and math.isfinite(pred)) or pred <= 0.0:
        return -math.inf
    return ered / pred


def actual_reduction(x: np.ndarray, s: np.ndarray, oracle: Oracle) -> float:
    """``f^P(x) - f^P(x + s)`` using two counted top-level evaluations."""
    top = oracle.top
    fx = oracle.f(x, top)
    fxs = oracle.f(x + s, top)
    if not (math.isfinite(fx) and math.isfinite(fxs)):
        raise EvaluationFailure("non-finite highest-precision function value")
    return fx - fxs


def theta_update(x: np.ndarray, s: np.ndarray, ered: float, oracle: Oracle) -> float:
    """``|ared - ered|`` where ``ared`` costs two top-level function calls."""
    return abs(actual_reduction(x, s, oracle) - ered)


def precision_test(theta: float, pred: float, r_k: float, config: SolverConfig) -> bool:
    """True when ``theta**omega <= eta * min(pred, r_k)``; False asks for more precision."""
    return theta**config.omega <= config.eta * min(pred, r_k)


def check_termination(state: SolverState, config: SolverConfig, oracle: Oracle) -> str | None:
    """Return a final status, or None to keep iterating.

    The first-order test is made on the top-level gradient norm, but that
    gradient is only computed (and counted) once the current-level norm has
    dropped below the tolerance.
    """
    top = oracle.top
    gnorm = float(np.linalg.norm(state.g_p))
    if gnorm < config.eps_tol:
        if state.p == top:
            return FIRST_ORDER
        key = state.x.tobytes()
        if state.confirmed is None or state.confirmed[0] != key:
            g_top = oracle.grad(state.x, top)
            state.confirmations += 1
            state.confirmed = (key, float(np.linalg.norm(g_top)))
        if state.confirmed[1] < config.eps_tol:
            return FIRST_ORDER
    if state.delta < RADIUS_FLOOR:
        return RADIUS_UNDERFLOW
    if state.k >= config.max_iter:
        return MAX_ITER
    return None


def _finite(f: float, g: np.ndarray | None = None) -> bool:
    if not math.isfinite(f):
        return False
    return g is None or bool(np.all(np.isfinite(g)))


# ---------------------------------------------------------------------------
# main loop
# ---------------------------------------------------------------------------


class _Counters:
    """Instrumented evaluation counts, kept apart from the oracle's ledger."""

    def __init__(self, levels: int):
        self.model_f = [0] * levels
        self.model_g = [0] * levels
        self.theta = 0
        self.escalations = 0

    def as_dict(self) -> dict:
        return {
            "model_f": list(self.model_f),
            "model_g": list(self.model_g),
            "theta_computations": self.theta,
            "escalations": self.escalations,
        }


def _as_oracle(problem, config: SolverConfig) -> Oracle:
    if isinstance(problem, Oracle):
        if problem.hierarchy.bits != config.hierarchy.bits:
            raise ValueError(
                f"oracle levels {problem.hierarchy} do not match configured hierarchy {config.hierarchy}"
            )
        return problem
    if isinstance(problem, ProblemSpec):
        return Oracle(problem, config.hierarchy)
    raise TypeError("expected a ProblemSpec or an Oracle")


def _start_point(oracle: Oracle, config: SolverConfig) -> np.ndarray:
    x0 = config.x0 if config.x0 is not None else oracle.problem.initial_point
    x = np.array(x0, dtype=np.float64)
    if x.shape != (oracle.problem.dim,):
        raise ValueError(f"x0 has length {x.size}, problem needs {oracle.problem.dim}")
    return x


def solve(problem: ProblemSpec | Oracle, config: SolverConfig | None = None,
          observer: Callable[[StepInfo], None] | None = None) -> SolveResult:
    """Minimise ``problem`` with the multi-precision trust-region method.

    Parameters
    ----------
    problem : ProblemSpec or Oracle
        A problem (a fresh counted oracle is built) or a ready oracle whose
        levels match ``config.hierarchy``.
    config : SolverConfig, optional
    observer : callable, optional
        Called once per iteration with a :class:`StepInfo`, after the step
        has been judged and before the state is updated.
    """
    config = config or SolverConfig()
    oracle = _as_oracle(problem, config)
    top = oracle.top
    bits = oracle.hierarchy.bits
    counters = _Counters(len(bits))
    history: list[IterationRecord] = []

    def model_f(x, p):
        counters.model_f[p] += 1
        return oracle.f(x, p)

    def model_g(x, p):
        counters.model_g[p] += 1
        return oracle.grad(x, p)

    def theta_at(x, s, ered):
        counters.theta += 1
        return theta_update(x, s, ered, oracle)

    x = _start_point(oracle, config)
    buffer = CurvaturePairBuffer(x.size, memory=config.lsr1_memory)
    state = SolverState(x=x, delta=config.delta0, p=0, f_p=math.nan, g_p=np.zeros_like(x), buffer=buffer)

    def finish(status: str) -> SolveResult:
        return _result(status, state, oracle, config, history, counters)

    # initial model data; climb until the evaluation is usable
    while True:
        state.f_p = model_f(state.x, state.p)
        state.g_p = model_g(state.x, state.p)
        if _finite(state.f_p, state.g_p):
            break
        if state.p == top:
            return finish(EVAL_FAILURE)
        state.p += 1
        counters.escalations += 1

    while True:
        status = check_termination(state, config, oracle)
        if status is not None:
            return finish(status)
        if state.p < top and float(np.linalg.norm(state.g_p)) < config.eps_tol:
            # the top-level gradient refuted stationarity: this level cannot
            # resolve the gradient any further, so move up before stepping
            while True:
                state.p += 1
                counters.escalations += 1
                state.f_p = model_f(state.x, state.p)
                state.g_p = model_g(state.x, state.p)
                if _finite(state.f_p, state.g_p):
                    break
                if state.p == top:
                    return finish(EVAL_FAILURE)
            continue

        k, p, x, g = state.k, state.p, state.x, state.g_p
        r_k = config.forcing(k)
        try:
            sub = steihaug_cg(g, buffer.hvp, state.delta)
        except SubproblemFailure:
            return finish(EVAL_FAILURE)
        s, pred = sub.step, sub.predicted_reduction
        x_trial = x + s
        f_trial = model_f(x_trial, p)
        ered = state.f_p - f_trial
        rho_t = rho_observed(ered, pred)
        delta_k = state.delta

        success = rho_t > config.eta1
        g_trial = None
        broken = not math.isfinite(f_trial)
        if success:
            g_trial = model_g(x_trial, p)
            if not _finite(f_trial, g_trial):
                success = False
                broken = True

        test_held = None
        escalate = False
        try:
            if not success:
                if broken:
                    # unusable low-precision value: force a precision increase
                    if p == top:
                        return finish(EVAL_FAILURE)
                    state.theta = math.inf
                    state.failed_once = True
                    escalate = True
                else:
                    if not state.failed_once:
                        state.theta = theta_at(x, s, ered)
                        state.failed_once = True
                    test_held = precision_test(state.theta, pred, r_k, config)
                    escalate = not test_held and p < top
        except EvaluationFailure:
            return finish(EVAL_FAILURE)

        if observer is not None:
            observer(StepInfo(
                k=k, p=p, x=x, s=s, g=g, delta=delta_k, pred=pred, ered=ered, rho_tilde=rho_t,
                r_k=r_k, success=success, theta=state.theta, test_held=test_held,
                escalated=escalate, termination=sub.termination, hvp=buffer.hvp,
            ))

        if success:
            if np.any(s):
                buffer.update(s, g_trial - g)
            state.x = x_trial
            state.f_p = f_trial
            state.g_p = g_trial
            if rho_t > config.eta2:
                state.delta = config.gamma_inc * delta_k
        elif escalate:
            try:
                while True:
                    state.p += 1
                    counters.escalations += 1
                    q = state.p
                    f_here = model_f(x, q)
                    f_there = model_f(x_trial, q)
                    state.theta = theta_at(x, s, f_here - f_there)
                    state.f_p = f_here
                    state.g_p = model_g(x, q)
                    if _finite(state.f_p, state.g_p) or q == top:
                        break
            except EvaluationFailure:
                return finish(EVAL_FAILURE)
            if not _finite(state.f_p, state.g_p):
                return finish(EVAL_FAILURE)
            if config.reset_memory_on_switch:
                buffer.reset()
        else:
            state.delta = config.gamma_dec * delta_k

        history.append(IterationRecord(
            k=k,
            p_bits=bits[p],
            delta=delta_k,
            rho_tilde=rho_t,
            pred=pred,
            success=success,
            f_est=state.f_p,
            gnorm_est=float(np.linalg.norm(state.g_p)),
            escalated=escalate,
        ))
        state.k += 1


def _result(status: str, state: SolverState, oracle: Oracle, config: SolverConfig,
            history: list[IterationRecord], counters: _Counters) -> SolveResult:
    top = oracle.top
    x = state.x
    if state.p == top and math.isfinite(state.f_p):
        f_final = state.f_p
        gnorm_final = float(np.linalg.norm(state.g_p))
    else:
        # reporting only: not charged to the ledger
        f_final = oracle.f_uncounted(x, top)
        if state.confirmed is not None and state.confirmed[0] == x.tobytes():
            gnorm_final = state.confirmed[1]
        else:
            gnorm_final = float(np.linalg.norm(oracle.grad_uncounted(x, top)))
    info = counters.as_dict()
    info["confirmations"] = state.confirmations
    return SolveResult(
        status=status,
        x_final=x.copy(),
        f_final=f_final,
        gnorm_final=gnorm_final,
        iterations=len(history),
        ledger=oracle.ledger.copy(),
        history=history,
        final_level=state.p,
        hierarchy=oracle.hierarchy,
        counters=info,
    )


def classic_trust_region(problem: ProblemSpec, config: SolverConfig | None = None, bits: int = 53,
                         observer: Callable[[dict], None] | None = None) -> SolveResult:
    """Fixed-precision L-SR1 trust-region method with ``rho = ared / pred``.

    Uses the same constants, subproblem solver and stopping rules as
    :func:`solve` but knows nothing about precision levels.
    """
    config = config or SolverConfig()
    oracle = Oracle(problem, [bits])
    x = _start_point(oracle, config)
    buffer = CurvaturePairBuffer(x.size, memory=config.lsr1_memory)
    delta = config.delta0
    history: list[IterationRecord] = []
    f = oracle.f(x, 0)
    g = oracle.grad(x, 0)
    status = None
    if not _finite(f, g):
        status = EVAL_FAILURE
    k = 0
    while status is None:
        if np.linalg.norm(g) < config.eps_tol:
            status = FIRST_ORDER
            break
        if delta < RADIUS_FLOOR:
            status = RADIUS_UNDERFLOW
            break
        if k >= config.max_iter:
            status = MAX_ITER
            break
        try:
            sub = steihaug_cg(g, buffer.hvp, delta)
        except SubproblemFailure:
            status = EVAL_FAILURE
            break
        s, pred = sub.step, sub.predicted_reduction
        x_trial = x + s
        f_trial = oracle.f(x_trial, 0)
        if not math.isfinite(f_trial):
            status = EVAL_FAILURE
            break
        ared = f - f_trial
        rho = rho_observed(ared, pred)
        success = rho > config.eta1
        if observer is not None:
            observer({"k": k, "x": x, "s": s, "delta": delta, "rho": rho, "success": success})
        delta_k = delta
        if success:
            g_new = oracle.grad(x_trial, 0)
            if not _finite(f_trial, g_new):
                status = EVAL_FAILURE
                break
            if np.any(s):
                buffer.update(s, g_new - g)
            x, f, g = x_trial, f_trial, g_new
            if rho > config.eta2:
                delta = config.gamma_inc * delta
        else:
            delta = config.gamma_dec * delta
        history.append(IterationRecord(k, bits, delta_k, rho, pred, success, f, float(np.linalg.norm(g))))
        k += 1
    return SolveResult(
        status=status,
        x_final=x.copy(),
        f_final=f,
        gnorm_final=float(np.linalg.norm(g)),
        iterations=len(history),
        ledger=oracle.ledger.copy(),
        history=history,
        final_level=0,
        hierarchy=oracle.hierarchy,
    )
