"""Production quadrature: fixed Gauss-Legendre panels and a vector adaptive rule."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.integrate import quad_vec

from .errors import IntegrationError, ValidationError


@dataclass(frozen=True)
class QuadratureConfig:
    """Tolerances for the time integrals and the node count of the disc rule.

    ``abs_tol`` applies to normalised concentrations ``C/Q``.
    """

    abs_tol: float = 1e-10
    rel_tol: float = 1e-8
    gauss_nodes: int = 32
    max_intervals: int = 2000

    def __post_init__(self):
        if not (self.abs_tol > 0 or self.rel_tol > 0):
            raise ValidationError("at least one quadrature tolerance must be positive")
        if self.gauss_nodes < 2:
            raise ValidationError("gauss_nodes must be at least 2")


@lru_cache(maxsize=16)
def _leggauss(n: int):
    nodes, weights = np.polynomial.legendre.leggauss(n)
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


def gauss_legendre(n: int, a: float, b: float):
    """Nodes and weights of the ``n``-point rule mapped to ``[a, b]``."""
    x, w = _leggauss(int(n))
    half = 0.5 * (b - a)
    return 0.5 * (a + b) + half * x, half * w


def integrate_vector(func, a: float, b: float, config: QuadratureConfig = QuadratureConfig()):
    """Adaptive integral of an array-valued ``func`` over ``[a, b]``.

    Returns ``(value, error)``; raises :class:`IntegrationError` (carrying the
    partial estimate) when the subdivision budget is exhausted.
    """
    if a == b:
        return np.asarray(func(a)) * 0.0, 0.0
    value, error, info = quad_vec(func, a, b, epsabs=config.abs_tol, epsrel=config.rel_tol,
                                  limit=config.max_intervals, norm="max", full_output=True)
    if info.status != 0 or not np.all(np.isfinite(value)):
        raise IntegrationError(
            f"time integral over [{a:g}, {b:g}] did not converge (error bound {error:.3g})",
            estimate=value, error=error)
    return value, error
