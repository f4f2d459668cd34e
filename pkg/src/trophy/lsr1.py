"""Limited-memory SR1 Hessian approximation applied matrix-free.

The approximation is kept in compact form

    B = gamma*I + Psi^T M^{-1} Psi,   Psi = Y - gamma*S,
    M = D + L + L^T - gamma * S S^T,

where the rows of ``S`` and ``Y`` are the stored curvature pairs, ``D`` is the
diagonal of ``S Y^T`` and ``L`` its strictly lower triangle.  Only ``O(m n)``
numbers are stored and ``M`` (``m x m``) is factored once per update.
"""

from __future__ import annotations

import logging
import warnings
from collections import deque

import numpy as np
import scipy.linalg

__all__ = ["CurvaturePairBuffer", "SKIP_TOL"]

log = logging.getLogger(__name__)

SKIP_TOL = 1e-8


class CurvaturePairBuffer:
    """Ring buffer of ``(s, y)`` pairs backing an L-SR1 operator.

    Parameters
    ----------
    n : int
        Problem dimension.
    memory : int
        Maximum number of pairs kept; the oldest pair is evicted first.
    b0_scale : float
        Initial value of ``gamma`` in ``B0 = gamma * I``.
    rescale : bool
        Refresh ``gamma = y.y / s.y`` from each accepted pair when ``s.y > 0``.
    skip_tol : float
        Pairs with ``|s.(y - Bs)| < skip_tol * |s| |y - Bs|`` are rejected.
    """

    def __init__(self, n: int, memory: int = 10, b0_scale: float = 1.0, rescale: bool = True,
                 skip_tol: float = SKIP_TOL):
        if n < 1:
            raise ValueError("dimension must be positive")
        if memory < 1:
            raise ValueError("memory must be positive")
        if b0_scale < 0:
            raise ValueError("b0_scale must be non-negative")
        self.n = n
        self.memory = memory
        self.initial_scale = float(b0_scale)
        self.rescale = rescale
        self.skip_tol = skip_tol
        self.reset()

    def reset(self) -> None:
        """Drop every pair and restore the initial ``gamma``."""
        self._pairs: deque[tuple[np.ndarray, np.ndarray]] = deque(maxlen=self.memory)
        self.gamma = self.initial_scale
        self._psi = None
        self._lu = None
        self.n_accepted = 0
        self.n_skipped = 0
        self.degenerate = False

    @property
    def pairs(self) -> list[tuple[np.ndarray, np.ndarray]]:
        return [(s.copy(), y.copy()) for s, y in self._pairs]

    def __len__(self):
        return len(self._pairs)

    def _vec(self, v, name: str) -> np.ndarray:
        v = np.asarray(v, dtype=np.float64)
        if v.shape != (self.n,):
            raise ValueError(f"{name} must have shape ({self.n},), got {v.shape}")
        return v

    def hvp(self, v) -> np.ndarray:
        """Product of the current approximation with ``v``."""
        v = self._vec(v, "v")
        out = self.gamma * v
        if self._lu is not None:
            out = out + self._psi.T @ scipy.linalg.lu_solve(self._lu, self._psi @ v)
        return out

    __call__ = hvp

    def update(self, s, y) -> bool:
        """Offer a curvature pair; return True if it was stored."""
        s = self._vec(s, "s")
        y = self._vec(y, "y")
        snorm = np.linalg.norm(s)
        if snorm == 0.0:
            raise ValueError("step s must be non-zero")
        r = y - self.hvp(s)
        denom = float(s @ r)
        rnorm = np.linalg.norm(r)
        if not np.isfinite(denom) or denom == 0.0 or abs(denom) < self.skip_tol * snorm * rnorm:
            self.n_skipped += 1
            return False
        self._pairs.append((s.copy(), y.copy()))
        self.n_accepted += 1
        sy = float(s @ y)
        if self.rescale and sy > 0.0:
            self.gamma = float(y @ y) / sy
        self._rebuild()
        return True

    def _rebuild(self) -> None:
        S = np.array([p[0] for p in self._pairs])
        Y = np.array([p[1] for p in self._pairs])
        SY = S @ Y.T
        lower = np.tril(SY, -1)
        M = np.diag(np.diag(SY)) + lower + lower.T - self.gamma * (S @ S.T)
        self._psi = Y - self.gamma * S
        lu = None
        if np.all(np.isfinite(M)):
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
                lu = scipy.linalg.lu_factor(M, check_finite=False)
            if not np.all(np.diag(lu[0])):
                lu = None
        if lu is None:
            # correction term dropped; hvp falls back to gamma * v
            log.debug("L-SR1 middle matrix singular; using B0 only")
        self._lu = lu
        self.degenerate = lu is None
