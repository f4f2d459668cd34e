"""Unconstrained test objectives written as scalar-generic programs.

Each objective only uses ``+ - * /``, constant powers and the helpers from
:mod:`trophy.precision`, so the same code evaluates in plain double, in
emulated reduced precision, or on dual numbers.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import precision as pa
from .precision import Evaluation

__all__ = ["ProblemSpec", "evaluate", "list_problems", "get_problem", "problem_names"]


@dataclass(frozen=True)
class ProblemSpec:
    name: str
    dim: int
    program: Callable[[Sequence], object] = field(repr=False, compare=False)
    initial_point: tuple[float, ...]
    known_min_value: float | None = None
    known_minimizer: tuple[float, ...] | None = None
    description: str = ""

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError(f"{self.name}: dim must be >= 1")
        if len(self.initial_point) != self.dim:
            raise ValueError(f"{self.name}: initial point has length {len(self.initial_point)}")
        if self.known_minimizer is not None and len(self.known_minimizer) != self.dim:
            raise ValueError(f"{self.name}: minimizer has wrong length")

    @property
    def x0(self) -> np.ndarray:
        return np.array(self.initial_point, dtype=np.float64)

    def __call__(self, x):
        """Plain double-precision value."""
        return pa.eval_function(self.program, x, pa.DOUBLE_BITS)


def evaluate(problem: ProblemSpec, x, bits: int) -> Evaluation:
    """Objective value and gradient of ``problem`` at ``bits`` precision."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (problem.dim,):
        raise ValueError(f"{problem.name} expects a vector of length {problem.dim}, got shape {x.shape}")
    return pa.eval_with_gradient(problem.program, x, bits)


# ---------------------------------------------------------------------------
# objectives
# ---------------------------------------------------------------------------


def sphere(x):
    total = 0.0
    for xi in x:
        total = total + xi * xi
    return 0.5 * total


def rosenbrock(x):
    total = 0.0
    for i in range(len(x) - 1):
        t = x[i + 1] - x[i] * x[i]
        u = 1.0 - x[i]
        total = total + 100.0 * (t * t) + u * u
    return total


def beale(x):
    a, b = x[0], x[1]
    b2 = b * b
    t1 = 1.5 - a + a * b
    t2 = 2.25 - a + a * b2
    t3 = 2.625 - a + a * (b2 * b)
    return t1 * t1 + t2 * t2 + t3 * t3


def himmelblau(x):
    a, b = x[0], x[1]
    t1 = a * a + b - 11.0
    t2 = a + b * b - 7.0
    return t1 * t1 + t2 * t2


def booth(x):
    a, b = x[0], x[1]
    t1 = a + 2.0 * b - 7.0
    t2 = 2.0 * a + b - 5.0
    return t1 * t1 + t2 * t2


def powell_singular(x):
    t1 = x[0] + 10.0 * x[1]
    t2 = x[2] - x[3]
    t3 = x[1] - 2.0 * x[2]
    t4 = x[0] - x[3]
    t3 = t3 * t3
    t4 = t4 * t4
    return t1 * t1 + 5.0 * (t2 * t2) + t3 * t3 + 10.0 * (t4 * t4)


def extended_wood(x):
    total = 0.0
    for j in range(0, len(x), 4):
        a, b, c, d = x[j], x[j + 1], x[j + 2], x[j + 3]
        t1 = b - a * a
        t2 = 1.0 - a
        t3 = d - c * c
        t4 = 1.0 - c
        t5 = b - 1.0
        t6 = d - 1.0
        total = (
            total
            + 100.0 * (t1 * t1)
            + t2 * t2
            + 90.0 * (t3 * t3)
            + t4 * t4
            + 10.1 * (t5 * t5 + t6 * t6)
            + 19.8 * (t5 * t6)
        )
    return total


def dixon_price(x):
    t = x[0] - 1.0
    total = t * t
    for i in range(1, len(x)):
        u = 2.0 * (x[i] * x[i]) - x[i - 1]
        total = total + float(i + 1) * (u * u)
    return total


def trigonometric(x):
    n = len(x)
    csum = 0.0
    cosines = [pa.cos(xi) for xi in x]
    for c in cosines:
        csum = csum + c
    base = float(n) - csum
    total = 0.0
    for i in range(n):
        fi = base + float(i + 1) * (1.0 - cosines[i]) - pa.sin(x[i])
        total = total + fi * fi
    return total


def _quadratic(diag: tuple[float, ...]):
    def quadratic(x):
        total = 0.0
        for d, xi in zip(diag, x):
            total = total + d * (xi * xi)
        return 0.5 * total

    return quadratic


# every term carries a large offset that is only removed at the end; at
# reduced width the running sum swamps the small residual terms
_NOISY_OFFSET = 1000.0


def _noisy_sum(centers: tuple[float, ...]):
    def noisy_sum(x):
        total = 0.0
        for c, xi in zip(centers, x):
            t = xi - c
            t2 = t * t
            total = total + ((t2 + t2 * t2) + _NOISY_OFFSET)
        return total - _NOISY_OFFSET * len(centers)

    return noisy_sum


_NOISY_CENTERS = tuple(-i / 10.0 for i in range(1, 11))


def _condition_diagonal(kappa: float, n: int) -> tuple[float, ...]:
    return tuple(float(kappa ** (i / (n - 1))) for i in range(n))


def _dixon_price_minimizer(n: int) -> tuple[float, ...]:
    return tuple(2.0 ** (-(2.0**i - 2.0) / 2.0**i) for i in range(1, n + 1))


def _build_suite() -> dict[str, ProblemSpec]:
    specs = [
        ProblemSpec("sphere2", 2, sphere, (1.0, 1.0), 0.0, (0.0, 0.0), "0.5*||x||^2"),
        ProblemSpec("rosenbrock2", 2, rosenbrock, (-1.2, 1.0), 0.0, (1.0, 1.0)),
        ProblemSpec(
            "rosenbrock50",
            50,
            rosenbrock,
            tuple(-1.2 if i % 2 == 0 else 1.0 for i in range(50)),
            0.0,
            (1.0,) * 50,
            "chained Rosenbrock",
        ),
        ProblemSpec("beale", 2, beale, (1.0, 1.0), 0.0, (3.0, 0.5)),
        ProblemSpec("himmelblau", 2, himmelblau, (1.0, 1.0), 0.0, (3.0, 2.0)),
        ProblemSpec("booth", 2, booth, (1.0, 1.0), 0.0, (1.0, 3.0)),
        ProblemSpec("powell_singular", 4, powell_singular, (3.0, -1.0, 0.0, 1.0), 0.0, (0.0,) * 4),
        ProblemSpec("wood8", 8, extended_wood, (-3.0, -1.0) * 4, 0.0, (1.0,) * 8, "extended Wood"),
        ProblemSpec(
            "dixon_price10", 10, dixon_price, (1.0,) * 10, 0.0, _dixon_price_minimizer(10)
        ),
        ProblemSpec("trigonometric10", 10, trigonometric, (0.1,) * 10),
        ProblemSpec(
            "noisy_sum10",
            10,
            _noisy_sum(_NOISY_CENTERS),
            (1.0,) * 10,
            0.0,
            _NOISY_CENTERS,
            "shifted quartics riding on a large cancelling offset",
        ),
    ]
    for exponent in (2, 4, 6, 8, 10):
        diag = _condition_diagonal(10.0**exponent, 10)
        specs.append(
            ProblemSpec(
                f"quadratic_cond1e{exponent}",
                10,
                _quadratic(diag),
                (1.0,) * 10,
                0.0,
                (0.0,) * 10,
                f"diagonal quadratic, condition number 1e{exponent}",
            )
        )
    return {p.name: p for p in specs}


_SUITE = _build_suite()


def problem_names() -> list[str]:
    return sorted(_SUITE)


def get_problem(name: str) -> ProblemSpec:
    try:
        return _SUITE[name]
    except KeyError:
        raise KeyError(f"unknown problem {name!r}; choose from {', '.join(problem_names())}") from None


def list_problems(max_dim: int = 100) -> list[ProblemSpec]:
    """Suite members with ``dim <= max_dim``, ordered by name."""
    if max_dim < 1:
        raise ValueError("max_dim must be >= 1")
    return [_SUITE[k] for k in problem_names() if _SUITE[k].dim <= max_dim]


def quadratic_diagonal(name: str) -> tuple[float, ...]:
    """Diagonal of one of the ``quadratic_cond1e*`` problems."""
    exponent = int(name.rsplit("1e", 1)[1])
    return _condition_diagonal(10.0**exponent, 10)

