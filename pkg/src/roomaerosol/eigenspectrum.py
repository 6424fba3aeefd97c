"""Per-axis Sturm-Liouville spectra under Robin walls.

Each room axis ``0 <= v <= L`` carries the boundary conditions
``dC/dv = beta_lo * C`` at ``v = 0`` and ``dC/dv = beta_hi * C`` at ``v = L``
with ``beta = d / K``. Separating variables gives three families of modes:

* positive eigenvalues ``lambda_n`` solving
  ``tan(lambda L) = lambda (beta_lo - beta_hi) / (beta_lo beta_hi + lambda^2)``;
* at most one negative eigenvalue ``lt`` solving
  ``tanh(lt L) = lt (beta_lo - beta_hi) / (beta_lo beta_hi - lt^2)``;
* a zero mode when ``beta_hi == beta_lo / (1 + beta_lo L)``.

Roots are found in the scaled variable ``theta = lambda L`` using pole-free
forms of both equations, one bracket per root.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .errors import SolverError, ValidationError

DEFAULT_TOL = 1e-12
DEFAULT_DEGENERATE_TOL = 1e-12

# Guard offset (in theta units, i.e. multiples of pi) used at brackets that touch theta = 0.
_GUARD = 1e-9 * math.pi
_MAX_DOUBLINGS = 60
_MAX_BISECTIONS = 120


@dataclass(frozen=True)
class AxisSpec:
    """One spatial axis of the room.

    Attributes:
        length: axis length ``L`` in metres.
        diffusivity: molecular diffusivity ``K`` in m^2/s.
        deposition_lo: deposition velocity at ``v = 0`` in m/s.
        deposition_hi: deposition velocity at ``v = L`` in m/s.
    """

    length: float
    diffusivity: float
    deposition_lo: float = 0.0
    deposition_hi: float = 0.0

    def __post_init__(self):
        for name in ("length", "diffusivity", "deposition_lo", "deposition_hi"):
            value = getattr(self, name)
            if not isinstance(value, (int, float)) or not math.isfinite(value):
                raise ValidationError(f"{name} must be a finite number, got {value!r}")
        if self.length <= 0:
            raise ValidationError(f"length must be positive, got {self.length}")
        if self.diffusivity <= 0:
            raise ValidationError(f"diffusivity must be positive, got {self.diffusivity}")
        if self.deposition_lo < 0 or self.deposition_hi < 0:
            raise ValidationError("deposition velocities must be non-negative")
        if not (math.isfinite(self.beta_lo) and math.isfinite(self.beta_hi)):
            raise ValidationError("deposition / diffusivity overflows")

    @classmethod
    def from_betas(cls, length, beta_lo, beta_hi, diffusivity=1.0):
        """Build an axis from the Robin coefficients directly."""
        return cls(length, diffusivity, beta_lo * diffusivity, beta_hi * diffusivity)

    @property
    def beta_lo(self) -> float:
        return self.deposition_lo / self.diffusivity

    @property
    def beta_hi(self) -> float:
        return self.deposition_hi / self.diffusivity

    @property
    def small_root_threshold(self) -> float:
        """``(beta_lo - beta_hi) / (beta_lo beta_hi)``; ``inf`` when the product vanishes."""
        b1, b2 = self.beta_lo, self.beta_hi
        if b1 * b2 == 0.0:
            return math.inf
        return (b1 - b2) / (b1 * b2)


@dataclass(frozen=True)
class EigenSpectrum:
    """Solved modes of one axis. Immutable; safe to share between threads."""

    axis: AxisSpec
    positive_roots: np.ndarray
    negative_root: float | None
    zero_mode: bool
    count: int = field(init=False)

    def __post_init__(self):
        roots = np.asarray(self.positive_roots, dtype=float)
        roots.setflags(write=False)
        object.__setattr__(self, "positive_roots", roots)
        object.__setattr__(self, "count", int(roots.size))

    def __len__(self):
        return self.count


def _check_tol(tol):
    if not (0.0 < tol <= 1e-6):
        raise ValidationError(f"tol must lie in (0, 1e-6], got {tol}")


def detect_zero_mode(axis: AxisSpec, degenerate_tol: float = DEFAULT_DEGENERATE_TOL) -> bool:
    """True when ``V(v) = 1 + beta_lo v`` satisfies both walls (within ``degenerate_tol``)."""
    b1, b2, L = axis.beta_lo, axis.beta_hi, axis.length
    return abs(b2 - b1 / (1.0 + b1 * L)) <= degenerate_tol


def positive_intervals(axis: AxisSpec, count: int, zero_mode: bool = False):
    """Bracketing intervals of the first ``count`` positive roots, in theta = lambda L.

    Returns ``(base, sign)`` arrays: root ``k`` lies at ``base[k] + sign[k] * delta``
    for some ``delta`` in ``(0, pi/2)``.
    """
    b1, b2, L = axis.beta_lo, axis.beta_hi, axis.length
    k = np.arange(1, count + 1, dtype=float)
    if b1 < b2:
        # ((k - 1/2) pi, k pi), searched downward from k pi
        return k * math.pi, -np.ones(count)
    if b1 > b2 and not zero_mode and L < axis.small_root_threshold:
        # extra root in (0, pi/2), then (k pi, (k + 1/2) pi)
        return (k - 1.0) * math.pi, np.ones(count)
    return k * math.pi, np.ones(count)


def _reduced(delta, theta, c, d, sign):
    """Pole-free characteristic function in the bracket offset ``delta``.

    ``sin(theta)(theta^2 + c) - theta d cos(theta)`` with ``c = b1 b2 L^2`` and
    ``d = (b1 - b2) L`` after removing the ``(-1)^k`` factor of the shift.
    Negative at ``delta = 0`` and positive at ``delta = pi/2`` by construction.
    """
    return np.sin(delta) * (theta * theta + c) - sign * theta * d * np.cos(delta)


def solve_positive_eigenvalues(axis: AxisSpec, count: int, tol: float = DEFAULT_TOL,
                               zero_mode: bool | None = None) -> np.ndarray:
    """First ``count`` positive eigenvalues ``lambda_n`` (1/m), strictly increasing.

    Equal Robin coefficients give ``k pi / L`` exactly. Otherwise each root is
    bracketed in its interval and refined by vectorised bisection followed by a
    safeguarded secant step.
    """
    if not isinstance(count, (int, np.integer)) or count < 1:
        raise ValidationError(f"count must be a positive integer, got {count!r}")
    _check_tol(tol)
    b1, b2, L = axis.beta_lo, axis.beta_hi, axis.length
    if b1 == b2:
        return np.arange(1, count + 1, dtype=float) * math.pi / L
    if zero_mode is None:
        zero_mode = detect_zero_mode(axis)

    base, sign = positive_intervals(axis, count, zero_mode)
    c = b1 * b2 * L * L
    d = (b1 - b2) * L
    lo = np.zeros(count)
    hi = np.full(count, 0.5 * math.pi)

    if base[0] == 0.0:
        # theta = 0 is a trivial zero of the characteristic function; step off it
        guard = _GUARD
        while _reduced(guard, guard, c, d, 1.0) >= 0:
            guard *= 1e-3
            if guard < 1e-300:
                raise SolverError(f"no sign change in bracketing interval 1 of axis {axis}")
        lo[0] = guard
    f_lo = _reduced(lo, base + sign * lo, c, d, sign)
    f_hi = _reduced(hi, base + sign * hi, c, d, sign)
    bad = ~((f_lo < 0) & (f_hi > 0))
    if bad.any():
        k = int(np.flatnonzero(bad)[0])
        raise SolverError(f"no sign change in bracketing interval {k + 1} of axis {axis}")

    # bisection in delta; the bracket stays valid even if the budget runs out
    for _ in range(_MAX_BISECTIONS):
        mid = 0.5 * (lo + hi)
        f_mid = _reduced(mid, base + sign * mid, c, d, sign)
        neg = f_mid < 0
        lo = np.where(neg, mid, lo)
        f_lo = np.where(neg, f_mid, f_lo)
        hi = np.where(neg, hi, mid)
        f_hi = np.where(neg, f_hi, f_mid)
        width = hi - lo
        if np.all(width <= np.maximum(1e-4 * tol * (base + 1.0), 2 * np.spacing(mid))):
            break

    with np.errstate(invalid="ignore", divide="ignore"):
        sec = lo - f_lo * (hi - lo) / (f_hi - f_lo)
    inside = np.isfinite(sec) & (sec >= lo) & (sec <= hi)
    delta = np.where(inside, sec, 0.5 * (lo + hi))
    theta = base + sign * delta
    roots = theta / L

    resid = positive_residual(axis, roots)
    worst = int(np.argmax(resid / np.maximum(theta, 1.0)))
    if resid[worst] > tol * max(theta[worst], 1.0):
        raise SolverError(f"root in interval {worst + 1} did not converge "
                          f"(residual {resid[worst]:.3e} in lambda*L)")
    if not np.all(np.diff(roots) > 0):
        raise SolverError("positive eigenvalues are not strictly increasing")
    return roots


def _negative_function(mu, c, e):
    # tanh(mu) (mu^2 - c) - mu e, with e = (b2 - b1) L
    return math.tanh(mu) * (mu * mu - c) - mu * e


def negative_root_exists(axis: AxisSpec, zero_mode: bool | None = None) -> bool:
    """Existence rule for the single negative eigenvalue.

    Present when ``beta_lo < beta_hi``, when ``beta_lo > beta_hi`` and
    ``L > (beta_lo - beta_hi)/(beta_lo beta_hi)``, and when
    ``beta_lo == beta_hi > 0`` (root ``beta`` with eigenfunction ``exp(beta v)``).
    """
    b1, b2, L = axis.beta_lo, axis.beta_hi, axis.length
    if zero_mode is None:
        zero_mode = detect_zero_mode(axis)
    if zero_mode:
        return False
    if b1 == b2:
        return b1 > 0
    if b1 < b2:
        return True
    return L > axis.small_root_threshold


def solve_negative_eigenvalue(axis: AxisSpec, tol: float = DEFAULT_TOL,
                              zero_mode: bool | None = None) -> float | None:
    """The negative-eigenvalue root ``lt`` (1/m), or ``None`` when absent."""
    _check_tol(tol)
    if not negative_root_exists(axis, zero_mode):
        return None
    b1, b2, L = axis.beta_lo, axis.beta_hi, axis.length
    if b1 == b2:
        return b1
    c = b1 * b2 * L * L
    e = (b2 - b1) * L
    root_c = math.sqrt(c)
    if b1 < b2:
        lo = root_c if root_c > 0 else _GUARD
        hi = root_c + 1.0
        for _ in range(_MAX_DOUBLINGS):
            if _negative_function(hi, c, e) > 0:
                break
            lo, hi = hi, 2.0 * hi
        else:
            raise SolverError(f"negative-root bracket expansion failed for axis {axis}")
    else:
        lo, hi = _GUARD, root_c
        guard = _GUARD
        while _negative_function(lo, c, e) >= 0 and guard > 1e-300:
            guard *= 1e-3
            lo = min(guard, root_c * 1e-3)
    f_lo, f_hi = _negative_function(lo, c, e), _negative_function(hi, c, e)
    if not (f_lo < 0 < f_hi):
        raise SolverError(f"no sign change bracketing the negative root of axis {axis}")
    mu = brentq(_negative_function, lo, hi, args=(c, e), xtol=1e-300, rtol=max(tol * 1e-3, 4.5e-16),
                maxiter=500)
    return mu / L


def solve_spectrum(axis: AxisSpec, count: int, tol: float = DEFAULT_TOL,
                   degenerate_tol: float = DEFAULT_DEGENERATE_TOL) -> EigenSpectrum:
    """Complete mode set of one axis with ``count`` positive roots."""
    zero = detect_zero_mode(axis, degenerate_tol)
    positive = solve_positive_eigenvalues(axis, count, tol, zero_mode=zero)
    negative = solve_negative_eigenvalue(axis, tol, zero_mode=zero)
    return EigenSpectrum(axis=axis, positive_roots=positive, negative_root=negative, zero_mode=zero)


def positive_residual(axis: AxisSpec, roots) -> np.ndarray:
    """Newton-step distance (theta units) from each root to the nearest true root."""
    b1, b2, L = axis.beta_lo, axis.beta_hi, axis.length
    theta = np.asarray(roots, dtype=float) * L
    c = b1 * b2 * L * L
    d = (b1 - b2) * L
    f = np.sin(theta) * (theta * theta + c) - theta * d * np.cos(theta)
    df = np.cos(theta) * (theta * theta + c) + 2 * theta * np.sin(theta) - d * np.cos(theta) \
        + theta * d * np.sin(theta)
    return np.abs(f / df)


def negative_residual(axis: AxisSpec, root: float) -> float:
    """``|tanh(lt L)(lt^2 - b1 b2) - lt (b2 - b1)|`` scaled by its derivative, in theta units."""
    b1, b2, L = axis.beta_lo, axis.beta_hi, axis.length
    mu = root * L
    c = b1 * b2 * L * L
    e = (b2 - b1) * L
    f = _negative_function(mu, c, e)
    t = math.tanh(mu)
    df = (1 - t * t) * (mu * mu - c) + 2 * mu * t - e
    if df == 0:
        return abs(f)
    return abs(f / df)
