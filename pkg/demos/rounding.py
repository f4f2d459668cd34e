"""Emulated significand widths on a few familiar numbers.

Shows how 0.1, pi and a large-magnitude value look after rounding to 8, 11,
24 and 53 bits, and that the exponent range never shrinks: rounding near
the largest double overflows to inf rather than clamping.
"""

import math
import sys

from trophy.precision import round_to_bits

VALUES = {"0.1": 0.1, "pi": math.pi, "1/3": 1 / 3, "max double": sys.float_info.max}

print(f"{'value':>12} " + " ".join(f"{b:>24}" for b in (8, 11, 24, 53)))
for name, v in VALUES.items():
    print(f"{name:>12} " + " ".join(f"{round_to_bits(v, b):>24.17g}" for b in (8, 11, 24, 53)))

# a double just above 1: its low bits are dropped below 53
x = 1.0 + 2.0**-30
for b in (24, 31, 53):
    print(f"1 + 2^-30 at {b} bits -> {round_to_bits(x, b)!r}")
