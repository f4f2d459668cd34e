"""Truncated conjugate gradients for the trust-region subproblem.

Approximately minimises ``g.s + 0.5 s.Hs`` subject to ``||s|| <= delta`` with
the Steihaug-Toint method.  The first CG step is the Cauchy step, so the
returned point always achieves at least the Cauchy decrease.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

__all__ = ["SubproblemResult", "steihaug_cg", "default_cg_tol", "model_value", "boundary_step"]

INTERIOR = "interior_convergence"
BOUNDARY = "boundary_hit"
NEGATIVE_CURVATURE = "negative_curvature"
MAX_ITER = "max_iter"
NONFINITE = "nonfinite"


class SubproblemFailure(ArithmeticError):
    """The Hessian-vector product returned a non-finite vector."""


@dataclass
class SubproblemResult:
    step: np.ndarray
    predicted_reduction: float
    termination: str
    cg_iterations: int


def default_cg_tol(gnorm: float) -> float:
    """Residual target ``min(0.1, sqrt(||g||)) * ||g||``."""
    return min(0.1, math.sqrt(gnorm)) * gnorm


def model_value(g: np.ndarray, hvp: Callable[[np.ndarray], np.ndarray], s: np.ndarray) -> float:
    """``g.s + 0.5 s.Hs`` (the model with its constant term dropped)."""
    return float(g @ s + 0.5 * (s @ hvp(s)))


def boundary_step(z: np.ndarray, d: np.ndarray, delta: float) -> float:
    """Non-negative ``tau`` with ``||z + tau d|| = delta`` (``||z|| <= delta``)."""
    dd = float(d @ d)
    zd = float(z @ d)
    zz = float(z @ z)
    rad = zd * zd + dd * (delta * delta - zz)
    rad = math.sqrt(max(rad, 0.0))
    # cancellation-free root
    if zd >= 0.0:
        return (delta * delta - zz) / (zd + rad) if zd + rad > 0 else 0.0
    return (rad - zd) / dd


def _onto_boundary(z: np.ndarray, d: np.ndarray, delta: float) -> np.ndarray:
    """``z + tau d`` on the sphere, nudged inward so ``||s|| <= delta`` holds in floating point."""
    tau = boundary_step(z, d, delta)
    s = z + tau * d
    for _ in range(8):
        if np.linalg.norm(s) <= delta:
            return s
        tau = float(np.nextafter(tau, 0.0))
        s = z + tau * d
    shrink = np.nextafter(1.0, 0.0)
    while np.linalg.norm(s) > delta:
        s = s * shrink
    return s


def steihaug_cg(g, hvp: Callable[[np.ndarray], np.ndarray], delta: float, tol: float | None = None,
                max_iter: int | None = None) -> SubproblemResult:
    """Steihaug-Toint truncated CG.

    Parameters
    ----------
    g : array
        Model gradient.
    hvp : callable
        ``v -> H v`` for a symmetric (possibly indefinite) ``H``.
    delta : float
        Trust-region radius, must be positive.
    tol : float, optional
        Absolute residual target; defaults to :func:`default_cg_tol`.
    max_iter : int, optional
        CG iteration cap; defaults to ``len(g)``.

    Raises
    ------
    SubproblemFailure
        If ``hvp`` produces a non-finite vector.
    """
    g = np.asarray(g, dtype=np.float64)
    if not delta > 0:
        raise ValueError("delta must be positive")
    n = g.size
    gnorm = float(np.linalg.norm(g))
    if tol is None:
        tol = default_cg_tol(gnorm)
    if max_iter is None:
        max_iter = n

    z = np.zeros(n)
    if gnorm == 0.0:
        return SubproblemResult(z, 0.0, INTERIOR, 0)

    r = g.copy()
    d = -r
    rr = gnorm * gnorm
    termination = MAX_ITER
    it = 0
    while it < max_iter:
        it += 1
        Bd = hvp(d)
        if not np.all(np.isfinite(Bd)):
            raise SubproblemFailure("non-finite Hessian-vector product")
        dBd = float(d @ Bd)
        if dBd <= 0.0:
            z = _onto_boundary(z, d, delta)
            termination = NEGATIVE_CURVATURE
            break
        alpha = rr / dBd
        z_next = z + alpha * d
        if np.linalg.norm(z_next) > delta:
            z = _onto_boundary(z, d, delta)
            termination = BOUNDARY
            break
        z = z_next
        r = r + alpha * Bd
        rr_next = float(r @ r)
        if math.sqrt(rr_next) <= tol:
            termination = INTERIOR
            break
        d = -r + (rr_next / rr) * d
        rr = rr_next

    pred = -model_value(g, hvp, z)
    if not math.isfinite(pred):
        raise SubproblemFailure("non-finite predicted reduction")
    return SubproblemResult(z, max(pred, 0.0), termination, it)
