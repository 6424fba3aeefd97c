"""Continuous exhalation from a disc in the plane ``x = x_p``.

The disc (or a square surrogate) emits at a constant rate between ``start``
and ``end``. Its field is the point-source kernel integrated over the emitting
area and over release times ``tau``:

* y is integrated in closed form (interval integrals of the eigenfunctions);
* over the disc the y half-width depends on ``z0``, so ``z0`` is integrated
  with Gauss-Legendre after the substitution ``z0 = z_p + r_c sin(theta)``,
  which turns the half-width into ``r_c cos(theta)`` and removes the square-root
  endpoint behaviour;
* for squares z is closed form too;
* ``tau`` is integrated adaptively in the elapsed time ``s = t - tau`` with
  ``s = u^2`` so the ``s^{-1/2}`` behaviour next to an active source is smooth.

Releases younger than a few seconds would need more modes than any budget
allows, so below a geometry-dependent elapsed time the walls are dropped and
the unbounded-space kernels (Gaussians and erf differences) are used instead.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import erf

from .eigenspectrum import EigenSpectrum
from .errors import ValidationError
from .greens import (DEFAULT_MAX_MODES, DEFAULT_TAIL_TOL, AxisModel, Room, _scaled_negative_norm2,
                     _scaled_sinh_form, positive_denominator)
from .quadrature import QuadratureConfig, gauss_legendre, integrate_vector

DEFAULT_SOURCE_MODES = 200
# Receivers per quadrature run; bounds the tables when releases are fresh and
# the tail rule asks for the full mode budget.
POINT_CHUNK = 64


class PlanarSurrogate(enum.Enum):
    LOWER = "lower"
    EQUAL = "equal"
    UPPER = "upper"

    def side(self, radius: float) -> float:
        return radius * {"lower": math.sqrt(2.0), "equal": math.sqrt(math.pi), "upper": 2.0}[self.value]


@dataclass(frozen=True)
class ExhalationSource:
    plane_x: float
    center: tuple[float, float]
    radius: float
    start: float
    end: float
    strength_rate: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        if len(self.center) != 2:
            raise ValidationError("exhalation center needs (y_p, z_p)")
        if not self.radius >= 0:
            raise ValidationError("radius must be non-negative")
        if not self.end > self.start:
            raise ValidationError(f"exhalation end {self.end} must be after start {self.start}")
        if not self.strength_rate > 0:
            raise ValidationError("strength_rate must be positive")

    def check_inside(self, room: Room, half_width: float | None = None):
        if room.dims != 3:
            raise ValidationError("an exhalation source needs a 3-D room")
        w = self.radius if half_width is None else half_width
        yp, zp = self.center
        if not (0.0 < self.plane_x < room.x.length):
            raise ValidationError(f"source plane x={self.plane_x} must be interior")
        if w > min(yp, room.y.length - yp, zp, room.z.length - zp) + 1e-15:
            raise ValidationError("emitting area must lie inside the y-z cross-section")


def lhat_pos(spectrum: EigenSpectrum, n: int, tau: float, y_lo: float, y_hi: float) -> float:
    """Release-area integral of the positive-mode weight over ``[y_lo, y_hi]``.

    Literal form including ``exp(K l^2 tau)``; it overflows for large ``l^2 tau``
    and the field evaluators use the cancelled form instead.
    """
    axis = spectrum.axis
    _check_bounds(axis.length, y_lo, y_hi)
    lam = float(spectrum.positive_roots[n - 1]) if 1 <= n <= spectrum.count else None
    if lam is None:
        raise IndexError(f"mode index {n} outside 1..{spectrum.count}")
    b = axis.beta_lo
    bracket = (math.sin(lam * y_hi) - math.sin(lam * y_lo)
               + b / lam * (math.cos(lam * y_lo) - math.cos(lam * y_hi)))
    return 4.0 * lam * lam * math.exp(axis.diffusivity * lam * lam * tau) * bracket / float(
        positive_denominator(lam, b, axis.length))


def lhat_neg(spectrum: EigenSpectrum, tau: float, y_lo: float, y_hi: float):
    """Hyperbolic analogue of :func:`lhat_pos`; ``None`` without a negative mode."""
    a = spectrum.negative_root
    if a is None:
        return None
    axis = spectrum.axis
    _check_bounds(axis.length, y_lo, y_hi)
    b, L = axis.beta_lo, axis.length
    # both numerator and squared norm are carried scaled by exp(-aL) / exp(-2aL)
    num = (_scaled_sinh_form(a, b, y_hi, L) - _scaled_sinh_form(a, b, y_lo, L)) / a
    value = float(num) / _scaled_negative_norm2(a, b, L) * math.exp(-a * L)
    return value * math.exp(axis.diffusivity * a * a * tau)


def _check_bounds(length, lo, hi):
    if not (0.0 <= lo <= hi <= length):
        raise ValidationError(f"interval [{lo}, {hi}] must be ordered and inside [0, {length}]")


# Fresh releases are evaluated with free-space kernels while their spread is
# tiny next to the emitter's distance to every wall; see ``early_time_limit``.
WALL_CLEARANCE_EXPONENT = 60.0
# Composite rule over the z0 window of the free-space disc kernel.
WINDOW_PANELS, WINDOW_NODES = 12, 16
# Half-width of that window in units of sqrt(2 K s).
WINDOW_SIGMAS = 12.0


@dataclass(frozen=True)
class _Side:
    """Source or receiver extent along one axis: points (``hi is None``) or intervals."""

    lo: np.ndarray
    hi: np.ndarray | None = None

    @classmethod
    def of(cls, lo, hi=None):
        return cls(np.asarray(lo, dtype=float), None if hi is None else np.asarray(hi, dtype=float))

    def table(self, basis):
        return basis.point(self.lo) if self.hi is None else basis.interval(self.lo, self.hi)


def _smoothed_ramp(x, w):
    """Antiderivative of ``erf(x / w)``."""
    return x * erf(x / w) + w / math.sqrt(math.pi) * np.exp(-(x / w) ** 2)


def free_space_kernel(src: _Side, rcv: _Side, elapsed: float, diffusivity: float) -> np.ndarray:
    """Unbounded-line Green's function between ``src`` and ``rcv`` after ``elapsed`` seconds.

    Shape ``(receivers,)`` for a scalar source and ``(receivers, sources)`` otherwise.
    """
    w = 2.0 * math.sqrt(diffusivity * elapsed)
    scalar = src.lo.ndim == 0
    a = np.atleast_1d(src.lo)[None, :]
    c = np.atleast_1d(rcv.lo)[:, None]
    if src.hi is None and rcv.hi is None:
        out = np.exp(-((c - a) / w) ** 2) / (math.sqrt(math.pi) * w)
    elif rcv.hi is None:
        b = np.atleast_1d(src.hi)[None, :]
        out = 0.5 * (erf((c - a) / w) - erf((c - b) / w))
    elif src.hi is None:
        d = np.atleast_1d(rcv.hi)[:, None]
        out = 0.5 * (erf((d - a) / w) - erf((c - a) / w))
    else:
        b = np.atleast_1d(src.hi)[None, :]
        d = np.atleast_1d(rcv.hi)[:, None]
        out = 0.5 * (_smoothed_ramp(d - a, w) - _smoothed_ramp(c - a, w)
                     - _smoothed_ramp(d - b, w) + _smoothed_ramp(c - b, w))
    return out[:, 0] if scalar else out


def early_time_limit(axis, near: float, far: float) -> float:
    """Elapsed time below which wall images of a source in ``[near, far]`` are negligible.

    The image of a Robin wall at distance ``d`` is bounded by
    ``(1 + 4 |beta| K s / d) exp(-d^2 / 4 K s)`` times the free-space peak; the
    limit keeps the exponent at ``WALL_CLEARANCE_EXPONENT`` and the prefactor
    below ``1e3``.
    """
    K = axis.diffusivity
    d = min(near, axis.length - far)
    if d <= 0:
        return 0.0
    s = d * d / (4.0 * K * WALL_CLEARANCE_EXPONENT)
    beta = max(abs(axis.beta_lo), abs(axis.beta_hi))
    if beta > 0:
        s = min(s, 1e3 * d / (4.0 * beta * K))
    return s


class _AxisKernel:
    """One axis of an emitter-receiver pair: mode sums for old releases, free space for fresh ones."""

    def __init__(self, model: AxisModel, src: _Side, rcv: _Side):
        self.model = model
        self.src, self.rcv = src, rcv
        self.count = 0
        self._shift = None

    def mode_sum(self, count: int, s: float):
        """``rcv @ (src * exp(-rate s) / norm2)`` over the first ``count`` positive modes and the extra modes."""
        if count > self.count:
            # grow geometrically so a run of shrinking elapsed times rebuilds rarely
            self.count = min(max(count, 2 * self.count), self.model.max_modes)
            self.basis = self.model.basis(self.count)
            self.src_table, self.rcv_table = self.src.table(self.basis), self.rcv.table(self.basis)
        basis = self.basis
        count = min(count, basis.n_pos)
        pos, extra = basis.decay_split(s, count)
        n, size = basis.n_pos, basis.size
        src, rcv = self.src_table, self.rcv_table
        if src.ndim == 1:
            out = rcv[:, :count] @ (src[:count] * pos)
            if size > n:
                out = out + rcv[:, n:] @ (src[n:] * extra)
            return out
        out = rcv[:, :count] @ (src[:, :count] * pos).T
        if size > n:
            out = out + rcv[:, n:] @ (src[:, n:] * extra).T
        return out

    def free(self, s: float):
        return free_space_kernel(self.src, self.rcv, s, self.model.axis.diffusivity) + self.decaying_shift(s)

    def decaying_shift(self, s: float):
        """Difference between the decaying and the growing negative-mode term (zero in exact mode)."""
        if self._shift is None:
            basis = self.model.basis(1)
            k = basis.neg_index
            if k is None or self.model.negative_mode == "exact":
                self._shift = False
            else:
                src, rcv = self.src.table(basis)[..., k], self.rcv.table(basis)[..., k]
                self._shift = (np.multiply.outer(rcv, src) / basis.norm2[k], float(basis.rates[k]))
        if self._shift is False:
            return 0.0
        coeff, rate = self._shift
        return coeff * (math.exp(-rate * s) - math.exp(rate * s))


class ExhalationField:
    """Evaluator for one room and one exhalation source.

    ``modes`` fixes the positive-mode count per axis. When ``None`` every
    quadrature node at elapsed time ``s`` uses ``max(200, tail-rule count at s)``
    modes per axis, capped at ``max_modes``. Releases younger than
    :meth:`split_time` use free-space kernels instead of mode sums.
    """

    def __init__(self, room: Room, source: ExhalationSource, *, modes=None,
                 quadrature: QuadratureConfig = QuadratureConfig(), negative_mode="decaying",
                 tail_tol=DEFAULT_TAIL_TOL, max_modes=DEFAULT_MAX_MODES, models=None):
        source.check_inside(room)
        self.room = room
        self.source = source
        self.modes = modes
        self.quadrature = quadrature
        self.tail_tol = tail_tol
        self.models = models or [AxisModel(a, negative_mode=negative_mode, max_modes=max_modes)
                                 for a in room.axes]

    # -- helpers ----------------------------------------------------------------
    def active_window(self, t: float):
        """Elapsed-time range ``(s_min, s_max)`` of releases that reach time ``t``."""
        end = min(t, self.source.end)
        if end <= self.source.start:
            return None
        return t - end, t - self.source.start

    def split_time(self, half_width: float | None = None) -> float:
        """Elapsed time below which the emitter is evaluated as if the room had no walls."""
        w = self.source.radius if half_width is None else half_width
        xp, (yp, zp) = self.source.plane_x, self.source.center
        x, y, z = self.room.axes
        return min(early_time_limit(x, xp, xp), early_time_limit(y, yp - w, yp + w),
                   early_time_limit(z, zp - w, zp + w))

    def mode_counts(self, elapsed: float) -> list[int]:
        """Positive-mode count of each axis for releases ``elapsed`` seconds old."""
        if self.modes is not None:
            return [min(int(self.modes), m.max_modes) for m in self.models]
        return [min(max(DEFAULT_SOURCE_MODES, m.modes_needed(elapsed, self.tail_tol)), m.max_modes)
                for m in self.models]

    def _integrate(self, integrand, window, size, split):
        s_min, s_max = window
        u_lo, u_hi = math.sqrt(s_min), math.sqrt(s_max)

        def in_u(u):
            return 2.0 * u * integrand(u * u)

        total = 0.0
        cuts = [u_lo, *[c for c in (math.sqrt(split),) if u_lo < c < u_hi], u_hi]
        for a, b in zip(cuts[:-1], cuts[1:]):
            value, _ = integrate_vector(in_u, a, b, self.quadrature)
            total = total + np.asarray(value)
        return self.source.strength_rate * np.asarray(total).reshape(size)

    @staticmethod
    def _points(points):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if pts.shape[-1] != 3:
            raise ValidationError("points need (x, y, z) coordinates")
        return pts

    # -- square surrogates ----------------------------------------------------------
    def square_integrand(self, half_width: float, receivers):
        """Unit-rate kernel ``F(s)`` of a square emitter; ``receivers`` holds one :class:`_Side` per axis."""
        xp, (yp, zp) = self.source.plane_x, self.source.center
        sources = (_Side.of(xp), _Side.of(yp - half_width, yp + half_width),
                   _Side.of(zp - half_width, zp + half_width))
        axes = [_AxisKernel(m, s, r) for m, s, r in zip(self.models, sources, receivers)]
        split = self.split_time(half_width)

        def integrand(s):
            if s < split:
                return math.prod(ax.free(s) for ax in axes)
            return math.prod(ax.mode_sum(n, s) for ax, n in zip(axes, self.mode_counts(s)))

        integrand.split = split
        return integrand

    def square(self, points, t: float, surrogate: PlanarSurrogate | str, side: float | None = None):
        """Field of a square emitter (surrogate of the disc) at ``points`` and time ``t``."""
        surrogate = PlanarSurrogate(surrogate)
        side = surrogate.side(self.source.radius) if side is None else side
        half = 0.5 * side
        self.source.check_inside(self.room, half)
        pts = self._points(points)
        self._check_points(pts)
        window = self.active_window(t)
        if window is None or half == 0.0:
            return np.zeros(len(pts))

        def run(chunk):
            F = self.square_integrand(half, _point_receivers(chunk))
            return self._integrate(F, window, len(chunk), F.split)

        return self._chunked(pts, run)

    # -- disc ---------------------------------------------------------------------------
    def circular(self, points, t: float, constant_half_width: bool = False):
        """Field of the disc emitter.

        With ``constant_half_width`` the y half-width is held at ``r_c`` for every
        ``z0`` (the emitter becomes the ``2 r_c`` square while keeping the disc's
        z rules); used to cross-check the two code paths.
        """
        pts = self._points(points)
        self._check_points(pts)
        window = self.active_window(t)
        rc = self.source.radius
        if window is None or rc == 0.0:
            return np.zeros(len(pts))
        split = self.split_time()
        xp, (yp, zp) = self.source.plane_x, self.source.center
        theta, wts = gauss_legendre(self.quadrature.gauss_nodes, -0.5 * math.pi, 0.5 * math.pi)
        half = np.full_like(theta, rc) if constant_half_width else rc * np.cos(theta)
        dz = rc * np.cos(theta) * wts
        shape = (lambda th: np.full_like(th, rc)) if constant_half_width else (lambda th: rc * np.cos(th))

        def run(chunk):
            rx, ry, rz = _point_receivers(chunk)
            ax = _AxisKernel(self.models[0], _Side.of(xp), rx)
            ay = _AxisKernel(self.models[1], _Side.of(yp - half, yp + half), ry)
            az = _AxisKernel(self.models[2], _Side.of(zp + rc * np.sin(theta)), rz)
            fresh = _FreshDisc(self, chunk, shape, ay, az, theta, dz)

            def integrand(s):
                if s < split:
                    return ax.free(s) * fresh(s)
                nx, ny, nz = self.mode_counts(s)
                across = ay.mode_sum(ny, s) * az.mode_sum(nz, s)
                return ax.mode_sum(nx, s) * (across @ dz)

            return self._integrate(integrand, window, len(chunk), split)

        return self._chunked(pts, run)

    @staticmethod
    def _chunked(pts, run, size=POINT_CHUNK):
        """Evaluate ``run`` on blocks of points to bound the size of the mode tables."""
        if len(pts) <= size:
            return run(pts)
        return np.concatenate([run(pts[i:i + size]) for i in range(0, len(pts), size)])

    def _check_points(self, pts):
        for k, axis in enumerate(self.room.axes):
            if np.any(pts[:, k] < 0) or np.any(pts[:, k] > axis.length):
                raise ValidationError(f"evaluation point outside the room along {'xyz'[k]}")


class _FreshDisc:
    """y-z factor of the disc for fresh releases, ``int dz0 G_z(z - z0) E_y(y; h(z0))``.

    The z kernel is far narrower than the disc, so each receiver integrates only
    the window of ``z0`` where it is not negligible, with a composite rule in
    ``theta``. Decaying-mode shifts of the negative mode are smooth in ``z0`` and use the
    ordinary disc rule.
    """

    def __init__(self, field, pts, shape, ay: _AxisKernel, az: _AxisKernel, theta, dz):
        self.pts = pts
        self.shape = shape
        self.ay, self.az = ay, az
        self.theta, self.dz = theta, dz
        self.rc = field.source.radius
        self.yp, self.zp = field.source.center
        self.Ky = field.models[1].axis.diffusivity
        self.Kz = field.models[2].axis.diffusivity
        x, w = np.polynomial.legendre.leggauss(WINDOW_NODES)
        edges = np.linspace(0.0, 1.0, WINDOW_PANELS + 1)
        half = 0.5 * np.diff(edges)
        self.unit_nodes = ((edges[:-1] + half)[:, None] + half[:, None] * x[None, :]).ravel()
        self.unit_weights = (half[:, None] * w[None, :]).ravel()

    def __call__(self, s):
        rc, yp, zp = self.rc, self.yp, self.zp
        y, z = self.pts[:, 1], self.pts[:, 2]
        reach = WINDOW_SIGMAS * math.sqrt(2.0 * self.Kz * s)
        lo = np.clip((np.maximum(zp - rc, z - reach) - zp) / rc, -1.0, 1.0)
        hi = np.clip((np.minimum(zp + rc, z + reach) - zp) / rc, -1.0, 1.0)
        th_lo, th_hi = np.arcsin(lo), np.arcsin(np.maximum(hi, lo))
        span = th_hi - th_lo
        th = th_lo[:, None] + span[:, None] * self.unit_nodes[None, :]
        h = self.shape(th)
        z0 = zp + rc * np.sin(th)
        wy = 2.0 * math.sqrt(self.Ky * s)
        wz = 2.0 * math.sqrt(self.Kz * s)
        gz = np.exp(-((z[:, None] - z0) / wz) ** 2) / (math.sqrt(math.pi) * wz)
        dy = y[:, None] - yp
        ey = 0.5 * (erf((dy + h) / wy) - erf((dy - h) / wy))
        shift_y = self.ay.decaying_shift(s)
        if not np.isscalar(shift_y):
            # the shift is tabulated on the ordinary nodes; it varies slowly in z0
            ey = ey + np.array([np.interp(t, self.theta, row) for t, row in zip(th, shift_y)])
        value = (gz * ey * rc * np.cos(th)) @ self.unit_weights * span
        shift_z = self.az.decaying_shift(s)
        if not np.isscalar(shift_z):
            value = value + (self.ay.free(s) * shift_z) @ self.dz
        return value


def _point_receivers(pts):
    return [_Side.of(pts[:, k]) for k in range(3)]


def concentration_circular(room, source, x, y, z, t, quadrature=QuadratureConfig(), **kwargs):
    pts = np.stack(np.broadcast_arrays(*(np.asarray(v, float) for v in (x, y, z))), axis=-1)
    shape = pts.shape[:-1]
    out = ExhalationField(room, source, quadrature=quadrature, **kwargs).circular(pts.reshape(-1, 3), t)
    return out.reshape(shape)


def concentration_square(room, source, surrogate, x, y, z, t, quadrature=QuadratureConfig(), **kwargs):
    pts = np.stack(np.broadcast_arrays(*(np.asarray(v, float) for v in (x, y, z))), axis=-1)
    shape = pts.shape[:-1]
    out = ExhalationField(room, source, quadrature=quadrature, **kwargs).square(pts.reshape(-1, 3), t, surrogate)
    return out.reshape(shape)
