"""Multi-precision trust-region optimisation with emulated reduced-precision arithmetic."""

from .benchmark import RunRecord, ProfileCurve, performance_profile, performance_ratios, run_grid
from .oracle import COST_MODELS, CostModel, EvalLedger, Oracle, PrecisionHierarchy, UsageError, adjusted_calls
from .precision import DualScalar, PrecisionLevel, RoundedScalar, eval_function, eval_with_gradient, round_to_bits
from .problems import ProblemSpec, get_problem, list_problems, problem_names
from .solver import SolveResult, SolverConfig, classic_trust_region, solve
from .subproblem import steihaug_cg
from .lsr1 import CurvaturePairBuffer

__version__ = "0.1.0"

__all__ = [
    "COST_MODELS",
    "CostModel",
    "CurvaturePairBuffer",
    "DualScalar",
    "EvalLedger",
    "Oracle",
    "PrecisionHierarchy",
    "PrecisionLevel",
    "ProblemSpec",
    "ProfileCurve",
    "RoundedScalar",
    "RunRecord",
    "SolveResult",
    "SolverConfig",
    "UsageError",
    "adjusted_calls",
    "classic_trust_region",
    "eval_function",
    "eval_with_gradient",
    "get_problem",
    "list_problems",
    "performance_profile",
    "performance_ratios",
    "problem_names",
    "round_to_bits",
    "run_grid",
    "solve",
    "steihaug_cg",
]
