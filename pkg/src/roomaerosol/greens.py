"""Instantaneous point-source solution in a Robin-walled box.

The 1-D factor along one axis is the eigenfunction series

    C_v(v, t) = sum_n l_n Phi_n(v, t) + l~ Phi~(v, t) + l_0 V_0(v)

and the 3-D concentration is the product of the three axis factors. Every
evaluation here goes through :class:`ModeBasis`, which stores the modes of one
axis in a uniform layout (positive modes, then the optional negative and zero
modes) so a 1-D factor is always

    sum_m  src_m * rcv_m * exp(-rate_m * s) / norm2_m

with ``src``/``rcv`` the point values or interval integrals of the
eigenfunctions at the source and receiver and ``s`` the elapsed time. The
``exp(K lambda^2 t0)`` factor of the weights is cancelled against the time
factor of the eigenfunction, so only ``exp(-K lambda^2 (t - t0))`` is formed.

The negative mode is large near the wall; its point values, integrals and
squared norm are all carried scaled by ``exp(-lt L)`` (``exp(-2 lt L)`` for the
norm) so that products stay finite.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass

import numpy as np

from .eigenspectrum import (AxisSpec, DEFAULT_DEGENERATE_TOL, DEFAULT_TOL, EigenSpectrum,
                            solve_spectrum)
from .errors import SolverError, ValidationError

NEGATIVE_MODES = ("decaying", "exact")
DEFAULT_TAIL_TOL = 1e-12
DEFAULT_MAX_MODES = 100_000


@dataclass(frozen=True)
class Room:
    """Rectangular room; ``y`` and ``z`` may be omitted for 1-D studies."""

    x: AxisSpec
    y: AxisSpec | None = None
    z: AxisSpec | None = None

    @property
    def axes(self) -> tuple[AxisSpec, ...]:
        return tuple(a for a in (self.x, self.y, self.z) if a is not None)

    @property
    def dims(self) -> int:
        return len(self.axes)

    @property
    def volume(self) -> float:
        return math.prod(a.length for a in self.axes)

    def check_point(self, point, what="point"):
        point = tuple(float(p) for p in np.atleast_1d(point))
        if len(point) != self.dims:
            raise ValidationError(f"{what} needs {self.dims} coordinates, got {len(point)}")
        for name, p, axis in zip("xyz", point, self.axes):
            if not (0.0 <= p <= axis.length):
                raise ValidationError(f"{what} {name}={p} lies outside [0, {axis.length}]")
        return point


@dataclass(frozen=True)
class PointSource:
    """Instantaneous release of ``strength`` at ``position`` and ``release_time``."""

    position: tuple[float, ...]
    strength: float = 1.0
    release_time: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "position", tuple(float(p) for p in self.position))
        if not self.strength > 0:
            raise ValidationError(f"strength must be positive, got {self.strength}")
        if not math.isfinite(self.release_time):
            raise ValidationError("release_time must be finite")

    def check_inside(self, room: Room):
        room.check_point(self.position, "source position")
        for name, p, axis in zip("xyz", self.position, room.axes):
            if p == 0.0 or p == axis.length:
                raise ValidationError(f"point source on the {name} wall is not an interior source")


class ModeBasis:
    """Mode tables of one axis truncated to ``spectrum.count`` positive modes.

    ``negative_mode`` selects the time factor of the negative-eigenvalue mode:
    ``"decaying"`` decays it like the other modes, ``exp(-K lt^2 t)``;
    ``"exact"`` uses the separated solution ``exp(+K lt^2 t)`` of the ODE.
    """

    def __init__(self, spectrum: EigenSpectrum, negative_mode: str = "decaying"):
        if negative_mode not in NEGATIVE_MODES:
            raise ValidationError(f"negative_mode must be one of {NEGATIVE_MODES}")
        self.spectrum = spectrum
        self.negative_mode = negative_mode
        axis = spectrum.axis
        self.axis = axis
        self.length = axis.length
        self.beta = axis.beta_lo
        self.lam = np.asarray(spectrum.positive_roots)
        self.lam_neg = spectrum.negative_root
        self.has_zero = spectrum.zero_mode

        K, L, b = axis.diffusivity, axis.length, self.beta
        lam = self.lam
        rates = [K * lam * lam]
        norms = [positive_denominator(lam, b, L) / (4.0 * lam ** 3)]
        if self.lam_neg is not None:
            a = self.lam_neg
            rates.append(np.array([(-1.0 if negative_mode == "exact" else 1.0) * K * a * a]))
            norms.append(np.array([_scaled_negative_norm2(a, b, L)]))
        if self.has_zero:
            rates.append(np.zeros(1))
            norms.append(np.array([L + b * L * L + b * b * L ** 3 / 3.0]))
        self.rates = np.concatenate(rates)
        self.norm2 = np.concatenate(norms)
        self.size = self.rates.size
        self.n_pos = lam.size
        self.neg_index = self.n_pos if self.lam_neg is not None else None
        self.zero_index = self.size - 1 if self.has_zero else None

    # -- eigenfunction tables -------------------------------------------------
    def point(self, nu) -> np.ndarray:
        """Eigenfunction values ``V_m(nu)``; shape ``nu.shape + (size,)``."""
        nu = np.asarray(nu, dtype=float)
        arg = nu[..., None] * self.lam
        parts = [np.cos(arg) + (self.beta / self.lam) * np.sin(arg)]
        if self.lam_neg is not None:
            parts.append(_scaled_cosh_form(self.lam_neg, self.beta, nu, self.length)[..., None])
        if self.has_zero:
            parts.append((1.0 + self.beta * nu)[..., None])
        return np.concatenate(parts, axis=-1)

    def derivative(self, nu, order=1) -> np.ndarray:
        """Analytic ``d^k V_m / d nu^k`` for ``order`` 1 or 2."""
        nu = np.asarray(nu, dtype=float)
        lam, b = self.lam, self.beta
        arg = nu[..., None] * lam
        if order == 1:
            parts = [-lam * np.sin(arg) + b * np.cos(arg)]
        elif order == 2:
            parts = [-lam * lam * (np.cos(arg) + (b / lam) * np.sin(arg))]
        else:
            raise ValueError("order must be 1 or 2")
        if self.lam_neg is not None:
            a = self.lam_neg
            if order == 1:
                parts.append((a * _scaled_sinh_form(a, b, nu, self.length))[..., None])
            else:
                parts.append((a * a * _scaled_cosh_form(a, b, nu, self.length))[..., None])
        if self.has_zero:
            parts.append(np.full(nu.shape + (1,), b if order == 1 else 0.0))
        return np.concatenate(parts, axis=-1)

    def interval(self, lo, hi) -> np.ndarray:
        """Integrals ``int_lo^hi V_m(nu) d nu``; shape ``broadcast(lo, hi).shape + (size,)``."""
        lo, hi = np.broadcast_arrays(np.asarray(lo, dtype=float), np.asarray(hi, dtype=float))
        lam, b = self.lam, self.beta
        a1, a2 = lo[..., None] * lam, hi[..., None] * lam
        parts = [(np.sin(a2) - np.sin(a1) + (b / lam) * (np.cos(a1) - np.cos(a2))) / lam]
        if self.lam_neg is not None:
            a = self.lam_neg
            prim = lambda v: _scaled_sinh_form(a, b, v, self.length) / a  # noqa: E731
            parts.append((prim(hi) - prim(lo))[..., None])
        if self.has_zero:
            parts.append((hi - lo + 0.5 * b * (hi * hi - lo * lo))[..., None])
        return np.concatenate(parts, axis=-1)

    # -- time factors -----------------------------------------------------------
    def decay(self, elapsed) -> np.ndarray:
        """``exp(-rate_m * s)`` for elapsed time(s) ``s``; shape ``s.shape + (size,)``."""
        s = np.asarray(elapsed, dtype=float)
        with np.errstate(over="ignore"):
            out = np.exp(-s[..., None] * self.rates)
        if not np.all(np.isfinite(out)):
            raise SolverError("negative-mode growth factor overflows at the requested time")
        return out

    def decay_split(self, elapsed: float, count: int):
        """``exp(-rate s) / norm2`` for the first ``count`` positive modes and, separately, the extra modes."""
        n = self.n_pos
        pos = np.exp(-self.rates[:count] * elapsed) / self.norm2[:count]
        with np.errstate(over="ignore"):
            extra = np.exp(-self.rates[n:] * elapsed) / self.norm2[n:]
        if not np.all(np.isfinite(extra)):
            raise SolverError("negative-mode growth factor overflows at the requested time")
        return pos, extra

    def decay_rate_weighted(self, elapsed) -> np.ndarray:
        """``-rate_m * exp(-rate_m s)``: time derivative of the decay factors."""
        return -self.rates * self.decay(elapsed)

    def kernel(self, src, rcv, elapsed) -> np.ndarray:
        """Sum over modes of ``src * rcv * exp(-rate s) / norm2``.

        ``src`` and ``rcv`` broadcast against each other on their leading axes and
        against ``elapsed`` (which gets a trailing mode axis).
        """
        coeff = np.asarray(src) * np.asarray(rcv) / self.norm2
        return np.sum(coeff * self.decay(elapsed), axis=-1)

    def amplitude_envelope(self) -> np.ndarray:
        """Upper bound of ``max_v |V_m(v)|^2 / norm2_m`` for the positive modes."""
        return (1.0 + (self.beta / self.lam) ** 2) / self.norm2[: self.n_pos]


def positive_denominator(lam, beta, length):
    """``(l^2 - b^2) sin 2lL - 2 l b cos 2lL + 2 l ((l^2 + b^2) L + b)``.

    Equals ``4 lambda^3`` times the squared norm of the positive eigenfunction.
    """
    lam = np.asarray(lam, dtype=float)
    two = 2.0 * lam * length
    return ((lam * lam - beta * beta) * np.sin(two) - 2.0 * lam * beta * np.cos(two)
            + 2.0 * lam * ((lam * lam + beta * beta) * length + beta))


def negative_denominator(lam_neg, beta, length):
    """``(l^2 + b^2) sinh 2lL + 2 l b cosh 2lL + 2 l ((l^2 - b^2) L - b)`` (unscaled; may overflow)."""
    a = lam_neg
    two = 2.0 * a * length
    return ((a * a + beta * beta) * math.sinh(two) + 2.0 * a * beta * math.cosh(two)
            + 2.0 * a * ((a * a - beta * beta) * length - beta))


def _scaled_cosh_form(a, b, nu, length):
    """``(cosh(a nu) + (b/a) sinh(a nu)) * exp(-a L)`` without overflow."""
    nu = np.asarray(nu, dtype=float)
    return 0.5 * ((1.0 + b / a) * np.exp(a * (nu - length))
                  + (1.0 - b / a) * np.exp(-a * (nu + length)))


def _scaled_sinh_form(a, b, nu, length):
    """``(sinh(a nu) + (b/a) cosh(a nu)) * exp(-a L)`` without overflow."""
    nu = np.asarray(nu, dtype=float)
    return 0.5 * ((1.0 + b / a) * np.exp(a * (nu - length))
                  - (1.0 - b / a) * np.exp(-a * (nu + length)))


def _scaled_negative_norm2(a, b, length):
    """Squared norm of the negative eigenfunction times ``exp(-2 a L)``."""
    e2 = math.exp(-2.0 * a * length)
    e4 = e2 * e2
    bracket = ((a * a + b * b) * 0.5 * (1.0 - e4) + a * b * (1.0 + e4)
               + 2.0 * a * ((a * a - b * b) * length - b) * e2)
    return bracket / (4.0 * a ** 3)


class AxisModel:
    """Lazily extended spectrum of one axis with adaptive truncation.

    Spectra are cached by count (rounded up to a power of two) and the class is
    safe to share between threads.
    """

    def __init__(self, axis: AxisSpec, *, tol=DEFAULT_TOL, degenerate_tol=DEFAULT_DEGENERATE_TOL,
                 negative_mode="decaying", max_modes=DEFAULT_MAX_MODES):
        if negative_mode not in NEGATIVE_MODES:
            raise ValidationError(f"negative_mode must be one of {NEGATIVE_MODES}")
        self.axis = axis
        self.tol = tol
        self.degenerate_tol = degenerate_tol
        self.negative_mode = negative_mode
        self.max_modes = int(max_modes)
        self._cache: dict[int, ModeBasis] = {}
        self._lock = threading.Lock()

    def basis(self, count: int) -> ModeBasis:
        count = int(min(max(count, 1), self.max_modes))
        with self._lock:
            for have, basis in self._cache.items():
                if have == count:
                    return basis
            larger = [c for c in self._cache if c > count]
            if larger:
                big = self._cache[min(larger)]
                spec = EigenSpectrum(self.axis, big.spectrum.positive_roots[:count],
                                     big.spectrum.negative_root, big.spectrum.zero_mode)
            else:
                spec = solve_spectrum(self.axis, count, self.tol, self.degenerate_tol)
            basis = ModeBasis(spec, self.negative_mode)
            self._cache[count] = basis
            return basis

    def modes_needed(self, elapsed: float, tail_tol=DEFAULT_TAIL_TOL, n_min=16) -> int:
        """Smallest mode count whose last envelope term is below ``tail_tol`` of the envelope sum.

        Point-independent version of the "last weighted amplitude" stopping rule:
        amplitudes are bounded by ``max|V|^2 / ||V||^2`` so the count is safe for
        every evaluation point. Capped at ``max_modes``.
        """
        if elapsed <= 0:
            return self.max_modes
        count = max(int(n_min), 16)
        while True:
            basis = self.basis(count)
            env = basis.amplitude_envelope() * np.exp(-basis.rates[: basis.n_pos] * elapsed)
            total = np.cumsum(env)
            ok = np.flatnonzero(env <= tail_tol * total)
            if ok.size:
                return max(int(ok[0]) + 1, int(n_min))
            if count >= self.max_modes:
                return self.max_modes
            count = min(count * 4, self.max_modes)


# -- spec-level operations -----------------------------------------------------

def eigenfunction_pos(spectrum: EigenSpectrum, n: int, nu, t):
    """Positive-mode eigenfunction ``(cos(l v) + (b/l) sin(l v)) exp(-K l^2 t)``; ``n`` is 1-based."""
    lam = _positive_root(spectrum, n)
    axis = spectrum.axis
    nu = np.asarray(nu, dtype=float)
    return (np.cos(lam * nu) + axis.beta_lo / lam * np.sin(lam * nu)) * np.exp(-axis.diffusivity * lam * lam * t)


def eigenfunction_neg(spectrum: EigenSpectrum, nu, t):
    """Negative-mode eigenfunction ``(cosh(l v) + (b/l) sinh(l v)) exp(-K l^2 t)`` (may overflow)."""
    a = spectrum.negative_root
    if a is None:
        return None
    axis = spectrum.axis
    nu = np.asarray(nu, dtype=float)
    return (np.cosh(a * nu) + axis.beta_lo / a * np.sinh(a * nu)) * np.exp(-axis.diffusivity * a * a * t)


def _positive_root(spectrum, n):
    if not (1 <= n <= spectrum.count):
        raise IndexError(f"mode index {n} outside 1..{spectrum.count}")
    return float(spectrum.positive_roots[n - 1])


def weight_pos(spectrum: EigenSpectrum, n: int, source_position: float, release_time: float = 0.0,
               strength: float = 1.0) -> float:
    """Weight of positive mode ``n`` for a delta released at ``source_position``.

    ``4 l^3 Q (cos(l vp) + (b/l) sin(l vp)) exp(K l^2 t0)`` over the positive
    denominator. The bare ``exp(K l^2 t0)`` overflows for large ``l t0``; the
    series evaluators never use this form.
    """
    axis = spectrum.axis
    _check_on_axis(axis, source_position)
    lam = _positive_root(spectrum, n)
    b = axis.beta_lo
    num = 4.0 * lam ** 3 * strength * (math.cos(lam * source_position) + b / lam * math.sin(lam * source_position))
    return num * math.exp(axis.diffusivity * lam * lam * release_time) / float(
        positive_denominator(lam, b, axis.length))


def weight_neg(spectrum: EigenSpectrum, source_position: float, release_time: float = 0.0,
               strength: float = 1.0, scaled: bool = False):
    """Weight of the negative mode, or ``None`` without one.

    With ``scaled=True`` the value is multiplied by ``exp(lt L)`` (the factor that
    pairs with :func:`_scaled_cosh_form`), which keeps it representable for
    strongly absorbing walls.
    """
    a = spectrum.negative_root
    if a is None:
        return None
    axis = spectrum.axis
    _check_on_axis(axis, source_position)
    b, L = axis.beta_lo, axis.length
    w = strength * float(_scaled_cosh_form(a, b, source_position, L)) / _scaled_negative_norm2(a, b, L)
    w *= math.exp(axis.diffusivity * a * a * release_time)
    if scaled:
        return w
    return w * math.exp(-a * L)


def weight_zero(spectrum: EigenSpectrum, source_position: float, strength: float = 1.0):
    """Weight of the steady mode ``1 + b v``, or ``None`` without one."""
    if not spectrum.zero_mode:
        return None
    axis = spectrum.axis
    b, L = axis.beta_lo, axis.length
    return strength * (1.0 + b * source_position) / (L + b * L * L + b * b * L ** 3 / 3.0)


def _check_on_axis(axis, position):
    if not (0.0 <= position <= axis.length):
        raise ValidationError(f"source position {position} outside [0, {axis.length}]")


@dataclass(frozen=True)
class ModeWeights:
    """Series weights of one axis for one delta release.

    ``positive`` holds ``l_n exp(-K l_n^2 t0)`` (the release-time factor already
    cancelled), ``negative`` the negative-mode weight in the scaled convention of
    :class:`ModeBasis`, ``zero`` the steady-mode weight.
    """

    positive: np.ndarray
    negative: float | None
    zero: float | None
    release_time: float
    strength: float

    def vector(self) -> np.ndarray:
        parts = [self.positive]
        if self.negative is not None:
            parts.append([self.negative])
        if self.zero is not None:
            parts.append([self.zero])
        return np.concatenate([np.asarray(p, dtype=float) for p in parts])


def mode_weights(basis: ModeBasis, source_position: float, release_time: float = 0.0,
                 strength: float = 1.0) -> ModeWeights:
    _check_on_axis(basis.axis, source_position)
    w = strength * basis.point(source_position) / basis.norm2
    n = basis.n_pos
    neg = float(w[basis.neg_index]) if basis.neg_index is not None else None
    zero = float(w[basis.zero_index]) if basis.zero_index is not None else None
    return ModeWeights(w[:n].copy(), neg, zero, release_time, strength)


def concentration_1d(basis: ModeBasis, weights: ModeWeights, nu, t):
    """Series value of one axis factor at ``nu`` and absolute time ``t``.

    Zero before the release; the delta itself at ``t == t0`` is not representable.
    """
    t = float(t)
    if t < weights.release_time:
        return np.zeros(np.shape(nu))
    if t == weights.release_time:
        raise ValidationError("series is undefined at the release instant (delta initial condition)")
    nu = np.asarray(nu, dtype=float)
    _check_range(basis.axis, nu)
    vals = basis.point(nu)
    return np.sum(vals * (weights.vector() * basis.decay(t - weights.release_time)), axis=-1)


def _check_range(axis, nu):
    if np.any(nu < 0) or np.any(nu > axis.length):
        raise ValidationError(f"evaluation point outside [0, {axis.length}]")


class PointSeries:
    """Point-source field of a room with per-axis adaptive truncation.

    ``modes`` fixes the positive-mode count of every axis; leave it ``None`` to use
    the tail rule at each evaluation time.
    """

    def __init__(self, room: Room, *, modes=None, tail_tol=DEFAULT_TAIL_TOL, tol=DEFAULT_TOL,
                 degenerate_tol=DEFAULT_DEGENERATE_TOL, negative_mode="decaying",
                 max_modes=DEFAULT_MAX_MODES, models=None):
        self.room = room
        self.modes = modes
        self.tail_tol = tail_tol
        self.models = models or [AxisModel(a, tol=tol, degenerate_tol=degenerate_tol,
                                           negative_mode=negative_mode, max_modes=max_modes)
                                 for a in room.axes]

    def bases(self, elapsed):
        if self.modes is not None:
            return [m.basis(self.modes) for m in self.models]
        return [m.basis(m.modes_needed(elapsed, self.tail_tol)) for m in self.models]

    def axis_factor(self, k, source: PointSource, nu, t, basis=None):
        elapsed = t - source.release_time
        if basis is None:
            basis = self.bases(elapsed)[k]
        q = source.strength if k == 0 else 1.0
        w = mode_weights(basis, source.position[k], source.release_time, q)
        return concentration_1d(basis, w, nu, t)

    def evaluate(self, source: PointSource, points, t):
        """Concentration at ``points`` (shape ``(..., dims)``) and time ``t``."""
        source.check_inside(self.room)
        points = np.asarray(points, dtype=float)
        if points.shape[-1] != self.room.dims:
            raise ValidationError(f"points need {self.room.dims} coordinates")
        if t <= source.release_time:
            if t < source.release_time:
                return np.zeros(points.shape[:-1])
            raise ValidationError("series is undefined at the release instant (delta initial condition)")
        bases = self.bases(t - source.release_time)
        out = np.ones(points.shape[:-1])
        for k, basis in enumerate(bases):
            out = out * self.axis_factor(k, source, points[..., k], t, basis)
        return out


def concentration_point_3d(room: Room, source: PointSource, x, y, z, t, **kwargs):
    """Point-source concentration ``C_x C_y C_z`` with ``Q_x = Q_p`` and ``Q_y = Q_z = 1``."""
    pts = np.stack(np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float), np.asarray(z, float)), axis=-1)
    return PointSeries(room, **kwargs).evaluate(source, pts, t)
