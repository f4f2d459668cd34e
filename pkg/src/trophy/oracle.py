"""Precision hierarchies, counted oracles and adjusted-call cost models."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import precision as pa
from .precision import DOUBLE_BITS, PrecisionLevel
from .problems import ProblemSpec

__all__ = [
    "PrecisionHierarchy",
    "EvalLedger",
    "CostModel",
    "Oracle",
    "adjusted_calls",
    "display_round",
    "COST_MODELS",
    "LEDGER_COLUMNS",
    "write_ledger_csv",
]


class UsageError(ValueError):
    """Inconsistent arguments (level mismatch, bad index, ...)."""


@dataclass(frozen=True)
class PrecisionHierarchy:
    """Strictly increasing precision levels; the last one is treated as exact."""

    levels: tuple[PrecisionLevel, ...]

    def __post_init__(self):
        levels = tuple(lv if isinstance(lv, PrecisionLevel) else PrecisionLevel(int(lv)) for lv in self.levels)
        if not levels:
            raise UsageError("a precision hierarchy needs at least one level")
        bits = [lv.bits for lv in levels]
        if any(b >= c for b, c in zip(bits, bits[1:])):
            raise UsageError(f"precision levels must be strictly increasing, got {bits}")
        object.__setattr__(self, "levels", levels)

    @classmethod
    def from_bits(cls, bits: Iterable[int]) -> "PrecisionHierarchy":
        return cls(tuple(PrecisionLevel(int(b)) for b in bits))

    @property
    def bits(self) -> tuple[int, ...]:
        return tuple(lv.bits for lv in self.levels)

    @property
    def top(self) -> int:
        """Index P of the highest level."""
        return len(self.levels) - 1

    def __len__(self):
        return len(self.levels)

    def __getitem__(self, p: int) -> PrecisionLevel:
        return self.levels[p]

    def __str__(self):
        return "{" + ",".join(map(str, self.bits)) + "}"


@dataclass
class EvalLedger:
    """Per-level counts of function and gradient evaluations."""

    bits: tuple[int, ...]
    f_calls: list[int] = field(default_factory=list)
    g_calls: list[int] = field(default_factory=list)

    def __post_init__(self):
        self.bits = tuple(self.bits)
        if not self.f_calls:
            self.f_calls = [0] * len(self.bits)
        if not self.g_calls:
            self.g_calls = [0] * len(self.bits)
        if len(self.f_calls) != len(self.bits) or len(self.g_calls) != len(self.bits):
            raise UsageError("ledger counts must match the number of levels")

    @classmethod
    def for_hierarchy(cls, hierarchy: PrecisionHierarchy) -> "EvalLedger":
        return cls(hierarchy.bits)

    @classmethod
    def from_counts(cls, f_calls: Mapping[int, int], g_calls: Mapping[int, int] | None = None) -> "EvalLedger":
        """Build a ledger from ``{bits: count}`` mappings."""
        g_calls = g_calls or {}
        bits = sorted(set(f_calls) | set(g_calls))
        return cls(tuple(bits), [int(f_calls.get(b, 0)) for b in bits], [int(g_calls.get(b, 0)) for b in bits])

    @property
    def total_f(self) -> int:
        return sum(self.f_calls)

    @property
    def total_g(self) -> int:
        return sum(self.g_calls)

    @property
    def total(self) -> int:
        return self.total_f + self.total_g

    def copy(self) -> "EvalLedger":
        return EvalLedger(self.bits, list(self.f_calls), list(self.g_calls))

    def rows(self) -> list[tuple[int, int, int]]:
        return [(b, f, g) for b, f, g in zip(self.bits, self.f_calls, self.g_calls)]


@dataclass(frozen=True)
class CostModel:
    """Relative cost of one evaluation at each precision.

    ``linear_bits`` weighs a level by ``bits / reference_bits``,
    ``quadratic_bits`` by the square of that ratio and ``table`` looks the
    weight up by bit count.
    """

    kind: str = "linear_bits"
    table: tuple[tuple[int, float], ...] | None = None
    reference_bits: int = DOUBLE_BITS
    name: str = ""

    def __post_init__(self):
        if self.kind not in ("linear_bits", "quadratic_bits", "table"):
            raise UsageError(f"unknown cost model kind {self.kind!r}")
        if self.kind == "table" and not self.table:
            raise UsageError("table cost model needs a weight table")

    def weight(self, bits: int) -> float:
        if self.kind == "table":
            weights = dict(self.table)
            if bits not in weights:
                raise UsageError(f"cost table has no weight for {bits}-bit evaluations")
            return weights[bits]
        if bits > self.reference_bits:
            raise UsageError(f"{bits}-bit level exceeds the reference width {self.reference_bits}")
        ratio = bits / self.reference_bits
        return ratio if self.kind == "linear_bits" else ratio * ratio

    def weights(self, bits: Sequence[int]) -> list[float]:
        return [self.weight(b) for b in bits]


COST_MODELS: dict[str, CostModel] = {
    "linear": CostModel("linear_bits", name="linear"),
    "quadratic": CostModel("quadratic_bits", name="quadratic"),
    "paper-linear": CostModel("table", ((11, 0.25), (24, 0.5), (53, 1.0)), name="paper-linear"),
    "paper-quadratic": CostModel("table", ((11, 1 / 16), (24, 0.25), (53, 1.0)), name="paper-quadratic"),
}


def adjusted_calls(ledger: EvalLedger, model: CostModel | str, include_gradients: bool = False) -> float:
    """Cost-weighted number of evaluations recorded in ``ledger``.

    Only function calls are counted unless ``include_gradients`` is set, in
    which case gradient calls are added at the same per-level weights.

    >>> adjusted_calls(EvalLedger.from_counts({11: 465, 24: 1898, 53: 6}), "paper-linear")
    1071.25
    """
    if isinstance(model, str):
        model = COST_MODELS[model]
    total = 0.0
    for bits, f, g in ledger.rows():
        calls = f + g if include_gradients else f
        total += model.weight(bits) * calls
    return total


def display_round(value: float) -> int | float:
    """Round half away from zero for reporting; non-finite values pass through."""
    if not math.isfinite(value):
        return value
    return int(math.copysign(math.floor(abs(value) + 0.5), value))


class Oracle:
    """Counted access to ``f^p`` and ``grad f^p`` for one problem and hierarchy.

    Every call increments exactly one ledger counter.  Non-finite results are
    returned unchanged; callers decide what to do with them.
    """

    def __init__(self, problem: ProblemSpec, hierarchy: PrecisionHierarchy | Sequence[int]):
        if not isinstance(hierarchy, PrecisionHierarchy):
            hierarchy = PrecisionHierarchy.from_bits(hierarchy)
        self.problem = problem
        self.hierarchy = hierarchy
        self.ledger = EvalLedger.for_hierarchy(hierarchy)

    @property
    def top(self) -> int:
        return self.hierarchy.top

    def _bits(self, p: int) -> int:
        if not 0 <= p <= self.top:
            raise UsageError(f"level index {p} outside 0..{self.top}")
        return self.hierarchy[p].bits

    def _check_x(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.problem.dim,):
            raise UsageError(f"{self.problem.name} expects length {self.problem.dim}, got shape {x.shape}")
        return x

    def f(self, x, p: int) -> float:
        bits = self._bits(p)
        x = self._check_x(x)
        self.ledger.f_calls[p] += 1
        return pa.eval_function(self.problem.program, x, bits)

    def grad(self, x, p: int) -> np.ndarray:
        bits = self._bits(p)
        x = self._check_x(x)
        self.ledger.g_calls[p] += 1
        return pa.eval_with_gradient(self.problem.program, x, bits).gradient

    # aliases matching the operation names used in the docs
    eval_f = f
    eval_grad = grad

    def f_uncounted(self, x, p: int) -> float:
        """Reporting-only evaluation that bypasses the ledger."""
        return pa.eval_function(self.problem.program, self._check_x(x), self._bits(p))

    def grad_uncounted(self, x, p: int) -> np.ndarray:
        return pa.eval_with_gradient(self.problem.program, self._check_x(x), self._bits(p)).gradient


LEDGER_COLUMNS = ("problem", "solver", "level_bits", "f_calls", "g_calls")


def ledger_rows(problem: str, solver: str, ledger: EvalLedger) -> list[dict]:
    return [
        {"problem": problem, "solver": solver, "level_bits": b, "f_calls": f, "g_calls": g}
        for b, f, g in ledger.rows()
    ]


def write_ledger_csv(path, entries: Iterable[tuple[str, str, EvalLedger]]) -> None:
    """Write ``(problem, solver, ledger)`` triples as ledger CSV rows."""
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=LEDGER_COLUMNS, lineterminator="\n")
        writer.writeheader()
        for problem, solver, ledger in entries:
            writer.writerows(ledger_rows(problem, solver, ledger))
