"""Variable-significand arithmetic emulated on top of IEEE doubles.

Every elementary operation is carried out in native double precision and the
result is rounded (round-to-nearest, ties-to-even) to a chosen number of
significand bits.  The exponent range is left untouched, so reduced widths
never overflow earlier than double would.

Objectives are written once as *scalar-generic* programs: plain Python
functions that take a sequence of scalars and combine them with ``+ - * /``,
``**`` and the helpers :func:`sqrt`, :func:`exp`, :func:`log`, :func:`sin`,
:func:`cos`.  Feeding them :class:`RoundedScalar` values evaluates the
function at reduced precision, feeding them :class:`DualScalar` values also
propagates forward-mode derivatives through the same rounded arithmetic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple, Sequence

import numpy as np

__all__ = [
    "DOUBLE_BITS",
    "PrecisionLevel",
    "RoundedScalar",
    "DualScalar",
    "Evaluation",
    "round_to_bits",
    "round_array",
    "rounded_binop",
    "eval_function",
    "eval_with_gradient",
    "sqrt",
    "exp",
    "log",
    "sin",
    "cos",
    "fabs",
]

DOUBLE_BITS = 53


class PrecisionError(ValueError):
    """Raised for an invalid significand width."""


def _check_bits(bits: int) -> int:
    if isinstance(bits, bool) or not isinstance(bits, (int, np.integer)):
        raise PrecisionError(f"bits must be an integer, got {bits!r}")
    if not 2 <= bits <= DOUBLE_BITS:
        raise PrecisionError(f"bits must lie in [2, {DOUBLE_BITS}] (ties-to-even needs a fraction bit), got {bits}")
    return int(bits)


@dataclass(frozen=True, order=True)
class PrecisionLevel:
    """A significand width, counting the implicit leading bit.

    ``bits=24`` is IEEE single, ``bits=53`` is IEEE double (no rounding).
    """

    bits: int
    label: str = ""

    def __post_init__(self):
        _check_bits(self.bits)
        if not self.label:
            object.__setattr__(self, "label", _default_label(self.bits))

    @property
    def is_native(self) -> bool:
        return self.bits == DOUBLE_BITS


def _default_label(bits: int) -> str:
    return {11: "half", 24: "single", 53: "double"}.get(bits, f"{bits}b")


def round_to_bits(x: float, bits: int) -> float:
    """Round ``x`` to the nearest double carrying ``bits`` significand bits.

    Ties go to even.  Infinities and NaN pass through unchanged.

    >>> round_to_bits(1.0, 11)
    1.0
    >>> round_to_bits(2049.0, 11)
    2048.0
    """
    bits = _check_bits(bits)
    return _round(float(x), bits)


def _round(x: float, bits: int) -> float:
    # hot path: no validation
    if bits >= DOUBLE_BITS or x == 0.0 or not math.isfinite(x):
        return x
    m, e = math.frexp(x)
    # round() on a float is exact and ties to even
    try:
        return math.ldexp(float(round(math.ldexp(m, bits))), e - bits)
    except OverflowError:
        # rounded up past the largest finite double
        return math.copysign(math.inf, x)


def round_array(x, bits: int) -> np.ndarray:
    """Vectorised :func:`round_to_bits` over a float64 array."""
    bits = _check_bits(bits)
    return _round_array(np.asarray(x, dtype=np.float64), bits)


def _round_array(x: np.ndarray, bits: int) -> np.ndarray:
    if bits >= DOUBLE_BITS:
        return x
    m, e = np.frexp(x)
    # frexp/ldexp carry inf and nan through untouched; rint ties to even
    with np.errstate(over="ignore"):
        return np.ldexp(np.rint(np.ldexp(m, bits)), e - bits)


_BINOPS: dict[str, Callable[[float, float], float]] = {
    "add": lambda a, b: a + b,
    "sub": lambda a, b: a - b,
    "mul": lambda a, b: a * b,
    "div": lambda a, b: _native_div(a, b),
}


def _native_div(a: float, b: float) -> float:
    # IEEE semantics instead of ZeroDivisionError
    if b == 0.0:
        if a == 0.0 or math.isnan(a):
            return math.nan
        return math.copysign(math.inf, a) * math.copysign(1.0, b)
    return a / b


def rounded_binop(a: float, b: float, op: str, bits: int) -> float:
    """Apply ``op`` in double precision and round the result to ``bits``."""
    bits = _check_bits(bits)
    try:
        fn = _BINOPS[op]
    except KeyError:
        raise PrecisionError(f"unknown operation {op!r}") from None
    return _round(fn(float(a), float(b)), bits)


def _value(x) -> float:
    return x.value if isinstance(x, (RoundedScalar, DualScalar)) else float(x)


class RoundedScalar:
    """A double whose significand is held to ``bits`` bits after every op."""

    __slots__ = ("value", "bits")

    def __init__(self, value: float, bits: int):
        self.value = value
        self.bits = bits

    @classmethod
    def lift(cls, x: float, bits: int) -> "RoundedScalar":
        return cls(_round(float(x), bits), bits)

    def _coerce(self, other) -> float:
        if isinstance(other, RoundedScalar):
            if other.bits != self.bits:
                raise ValueError(f"cannot mix {self.bits}-bit and {other.bits}-bit scalars")
            return other.value
        if isinstance(other, DualScalar):
            raise TypeError("cannot mix RoundedScalar and DualScalar")
        return _round(float(other), self.bits)

    def _new(self, v: float) -> "RoundedScalar":
        return RoundedScalar(_round(v, self.bits), self.bits)

    def __add__(self, other):
        return self._new(self.value + self._coerce(other))

    def __radd__(self, other):
        return self._new(self._coerce(other) + self.value)

    def __sub__(self, other):
        return self._new(self.value - self._coerce(other))

    def __rsub__(self, other):
        return self._new(self._coerce(other) - self.value)

    def __mul__(self, other):
        return self._new(self.value * self._coerce(other))

    def __rmul__(self, other):
        return self._new(self._coerce(other) * self.value)

    def __truediv__(self, other):
        return self._new(_native_div(self.value, self._coerce(other)))

    def __rtruediv__(self, other):
        return self._new(_native_div(self._coerce(other), self.value))

    def __pow__(self, k):
        if isinstance(k, (RoundedScalar, DualScalar)):
            raise TypeError("only constant exponents are supported")
        if k == 2:
            return self._new(self.value * self.value)
        return self._new(_pow(self.value, k))

    def __neg__(self):
        return RoundedScalar(-self.value, self.bits)

    def __pos__(self):
        return self

    def __abs__(self):
        return RoundedScalar(abs(self.value), self.bits)

    def _unary(self, fn: Callable[[float], float]) -> "RoundedScalar":
        return self._new(_safe(fn, self.value))

    def sqrt(self):
        return self._unary(math.sqrt)

    def exp(self):
        return self._unary(math.exp)

    def log(self):
        return self._unary(math.log)

    def sin(self):
        return self._unary(math.sin)

    def cos(self):
        return self._unary(math.cos)

    def __float__(self):
        return self.value

    def __lt__(self, other):
        return self.value < _value(other)

    def __le__(self, other):
        return self.value <= _value(other)

    def __gt__(self, other):
        return self.value > _value(other)

    def __ge__(self, other):
        return self.value >= _value(other)

    def __repr__(self):
        return f"RoundedScalar({self.value!r}, bits={self.bits})"


def _pow(a: float, k: float) -> float:
    try:
        return math.pow(a, k)
    except OverflowError:
        return math.inf
    except ValueError:
        return math.nan


def _safe(fn: Callable[[float], float], a: float) -> float:
    try:
        return fn(a)
    except OverflowError:
        return math.inf
    except ValueError:
        # domain error (sqrt/log of a negative)
        if fn is math.log and a == 0.0:
            return -math.inf
        return math.nan


class DualScalar:
    """Forward-mode dual number ``value + tangent * eps`` in rounded arithmetic.

    ``tangent`` is a float64 array holding one derivative component per seed
    direction.  Every tangent rule acts componentwise, so carrying all ``n``
    seed directions at once gives exactly the numbers ``n`` separate scalar
    passes would.
    """

    __slots__ = ("value", "tangent", "bits")

    def __init__(self, value: float, tangent: np.ndarray, bits: int):
        self.value = value
        self.tangent = tangent
        self.bits = bits

    def _r(self, v: float) -> float:
        return _round(v, self.bits)

    def _rt(self, t: np.ndarray) -> np.ndarray:
        return _round_array(t, self.bits)

    def _const(self, c) -> float:
        return _round(float(c), self.bits)

    def __add__(self, other):
        if isinstance(other, DualScalar):
            return DualScalar(
                self._r(self.value + other.value),
                self._rt(self.tangent + other.tangent),
                self.bits,
            )
        _reject(other)
        return DualScalar(self._r(self.value + self._const(other)), self.tangent, self.bits)

    def __radd__(self, other):
        _reject(other)
        return DualScalar(self._r(self._const(other) + self.value), self.tangent, self.bits)

    def __sub__(self, other):
        if isinstance(other, DualScalar):
            return DualScalar(
                self._r(self.value - other.value),
                self._rt(self.tangent - other.tangent),
                self.bits,
            )
        _reject(other)
        return DualScalar(self._r(self.value - self._const(other)), self.tangent, self.bits)

    def __rsub__(self, other):
        _reject(other)
        return DualScalar(self._r(self._const(other) - self.value), -self.tangent, self.bits)

    def __mul__(self, other):
        if isinstance(other, DualScalar):
            a, b = self.value, other.value
            t = self._rt(self._rt(self.tangent * b) + self._rt(a * other.tangent))
            return DualScalar(self._r(a * b), t, self.bits)
        _reject(other)
        c = self._const(other)
        return DualScalar(self._r(self.value * c), self._rt(self.tangent * c), self.bits)

    def __rmul__(self, other):
        _reject(other)
        c = self._const(other)
        return DualScalar(self._r(c * self.value), self._rt(c * self.tangent), self.bits)

    def __truediv__(self, other):
        if isinstance(other, DualScalar):
            b = other.value
            q = self._r(_native_div(self.value, b))
            num = self._rt(self.tangent - self._rt(q * other.tangent))
            return DualScalar(q, self._rt(_div_array(num, b)), self.bits)
        _reject(other)
        c = self._const(other)
        return DualScalar(
            self._r(_native_div(self.value, c)),
            self._rt(_div_array(self.tangent, c)),
            self.bits,
        )

    def __rtruediv__(self, other):
        _reject(other)
        c = self._const(other)
        b = self.value
        q = self._r(_native_div(c, b))
        # d(c/b) = -(c/b) * b' / b
        num = self._rt(-(q * self.tangent))
        return DualScalar(q, self._rt(_div_array(num, b)), self.bits)

    def __pow__(self, k):
        if isinstance(k, (RoundedScalar, DualScalar)):
            raise TypeError("only constant exponents are supported")
        if k == 2:
            return self * self
        a = self.value
        d = self._r(k * self._r(_pow(a, k - 1)))
        return DualScalar(self._r(_pow(a, k)), self._rt(d * self.tangent), self.bits)

    def __neg__(self):
        return DualScalar(-self.value, -self.tangent, self.bits)

    def __pos__(self):
        return self

    def __abs__(self):
        if self.value < 0.0:
            return -self
        return self

    def _chain(self, value: float, slope: float) -> "DualScalar":
        d = self._r(slope)
        return DualScalar(self._r(value), self._rt(d * self.tangent), self.bits)

    def sqrt(self):
        r = self._r(_safe(math.sqrt, self.value))
        return DualScalar(r, self._rt(_div_array(self.tangent, self._r(2.0 * r))), self.bits)

    def exp(self):
        e = _safe(math.exp, self.value)
        return self._chain(e, e)

    def log(self):
        a = self.value
        return DualScalar(
            self._r(_safe(math.log, a)), self._rt(_div_array(self.tangent, a)), self.bits
        )

    def sin(self):
        return self._chain(math.sin(self.value), math.cos(self.value))

    def cos(self):
        return self._chain(math.cos(self.value), -math.sin(self.value))

    def __float__(self):
        return self.value

    def __lt__(self, other):
        return self.value < _value(other)

    def __le__(self, other):
        return self.value <= _value(other)

    def __gt__(self, other):
        return self.value > _value(other)

    def __ge__(self, other):
        return self.value >= _value(other)

    def __repr__(self):
        return f"DualScalar({self.value!r}, {self.tangent!r}, bits={self.bits})"


def _reject(other):
    if isinstance(other, RoundedScalar):
        raise TypeError("cannot mix RoundedScalar and DualScalar")


def _div_array(t: np.ndarray, b: float) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        return t / b


def _dispatch(name: str, fallback: Callable[[float], float]):
    def fn(x):
        if isinstance(x, (RoundedScalar, DualScalar)):
            return getattr(x, name)()
        return _safe(fallback, float(x))

    fn.__name__ = name
    fn.__doc__ = f"Scalar-generic ``{name}``: rounded for emulated scalars, ``math.{name}`` otherwise."
    return fn


sqrt = _dispatch("sqrt", math.sqrt)
exp = _dispatch("exp", math.exp)
log = _dispatch("log", math.log)
sin = _dispatch("sin", math.sin)
cos = _dispatch("cos", math.cos)


def fabs(x):
    """Scalar-generic absolute value."""
    return abs(x)


Program = Callable[[Sequence], object]


class Evaluation(NamedTuple):
    """Function value and (optionally) gradient from one oracle evaluation."""

    value: float
    gradient: np.ndarray | None = None

    @property
    def finite(self) -> bool:
        if not math.isfinite(self.value):
            return False
        return self.gradient is None or bool(np.all(np.isfinite(self.gradient)))


def eval_function(program: Program, x, bits: int) -> float:
    """Evaluate ``program`` at ``x`` with every operation rounded to ``bits``.

    The iterate is itself rounded to ``bits`` before evaluation.  At 53 bits
    the program runs on plain floats.
    """
    bits = _check_bits(bits)
    xs = [float(v) for v in np.asarray(x, dtype=np.float64).ravel()]
    with np.errstate(over="ignore", invalid="ignore"):
        if bits == DOUBLE_BITS:
            out = program(xs)
        else:
            out = program([RoundedScalar.lift(v, bits) for v in xs])
    return _value(out)


def eval_with_gradient(program: Program, x, bits: int) -> Evaluation:
    """Value and forward-mode gradient of ``program`` at ``bits`` precision.

    The gradient is the derivative of the rounded program, computed with dual
    numbers whose value and tangent parts are both rounded after every op.
    Non-finite results are returned as-is; check :attr:`Evaluation.finite`.
    """
    bits = _check_bits(bits)
    xv = np.asarray(x, dtype=np.float64).ravel()
    n = xv.size
    seeds = np.eye(n)
    duals = [DualScalar(_round(float(v), bits), seeds[i], bits) for i, v in enumerate(xv)]
    with np.errstate(over="ignore", invalid="ignore"):
        out = program(duals)
    if isinstance(out, DualScalar):
        return Evaluation(out.value, np.array(out.tangent, dtype=np.float64))
    # program ignored its inputs
    return Evaluation(_value(out), np.zeros(n))
