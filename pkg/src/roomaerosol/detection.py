"""Cuboid air sampler and the maximum-likelihood miss-detection probability.

The sampler collects the square-surrogate field over its volume during the
window ``[t - T_s, t]``. The kernel of the exhalation field depends on the
elapsed time ``s`` only, so

    C_samp = int_{t-T_s}^{t} dt' int_{t0}^{min(t', t_e)} F(t' - tau) dtau

with ``F(s)`` the product over axes of sampler-interval/source kernels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import erfc, log_ndtr

from .eigenspectrum import EigenSpectrum
from .errors import ValidationError
from .greens import Room, _scaled_sinh_form
from .quadrature import QuadratureConfig, integrate_vector
from .source import ExhalationField, PlanarSurrogate, _Side

CONSISTENCY_RTOL = 1e-12


@dataclass(frozen=True)
class SamplerSpec:
    """Cuboid sampler centred at ``center`` with edge lengths ``edges``.

    It integrates over the window ``[sample_end - sampling_time, sample_end]``.
    """

    center: tuple[float, float, float]
    edges: tuple[float, float, float]
    sampling_time: float
    sample_end: float

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        object.__setattr__(self, "edges", tuple(float(e) for e in self.edges))
        if len(self.center) != 3 or len(self.edges) != 3:
            raise ValidationError("sampler center and edges need three components")
        if min(self.edges) < 0:
            raise ValidationError("sampler edges must be non-negative")
        if self.sampling_time < 0:
            raise ValidationError("sampling_time must be non-negative")

    @property
    def volume(self) -> float:
        return math.prod(self.edges)

    @property
    def window(self) -> tuple[float, float]:
        return self.sample_end - self.sampling_time, self.sample_end

    def bounds(self, k: int) -> tuple[float, float]:
        return self.center[k] - 0.5 * self.edges[k], self.center[k] + 0.5 * self.edges[k]

    def check_inside(self, room: Room):
        for k, axis in enumerate(room.axes):
            lo, hi = self.bounds(k)
            if lo < -1e-12 or hi > axis.length + 1e-12:
                raise ValidationError(f"sampler extends outside the room along {'xyz'[k]}")

    def scaled(self, volume_factor=1.0, time_factor=1.0) -> "SamplerSpec":
        """Same center; edges scaled by ``volume_factor**(1/3)``, window length by ``time_factor``."""
        edge = volume_factor ** (1.0 / 3.0)
        return SamplerSpec(self.center, tuple(e * edge for e in self.edges),
                           self.sampling_time * time_factor, self.sample_end)


def gamma_from_db(db: float) -> float:
    return 10.0 ** (db / 10.0)


@dataclass(frozen=True)
class DetectorSpec:
    """Detector either by its physical parameters ``(eta, gamma, sigma2)`` or by
    the ratio ``gamma_ratio = q_p (eta gamma)^2 / (8 sigma2)`` with ``q_p``.

    When both forms are given they must agree to 1e-12 relative.
    """

    eta: float | None = None
    gamma: float | None = None
    sigma2: float | None = None
    gamma_ratio: float | None = None
    q_p: float | None = None

    def __post_init__(self):
        physical = (self.eta, self.gamma, self.sigma2)
        have_physical = all(v is not None for v in physical)
        if any(v is not None for v in physical) and not have_physical:
            raise ValidationError("eta, gamma and sigma2 must be given together")
        if have_physical:
            if not (0 < self.eta <= 1 and 0 < self.gamma <= 1):
                raise ValidationError("eta and gamma must lie in (0, 1]")
            if not self.sigma2 > 0:
                raise ValidationError("sigma2 must be positive")
        if self.gamma_ratio is not None:
            if not self.gamma_ratio > 0:
                raise ValidationError("gamma_ratio must be positive")
            if self.q_p is None:
                raise ValidationError("gamma_ratio needs the source strength q_p")
        elif not have_physical:
            raise ValidationError("detector needs (eta, gamma, sigma2) or (gamma_ratio, q_p)")
        if self.q_p is not None and not self.q_p > 0:
            raise ValidationError("q_p must be positive")
        if have_physical and self.gamma_ratio is not None:
            implied = self.q_p * (self.eta * self.gamma) ** 2 / (8.0 * self.sigma2)
            if abs(implied - self.gamma_ratio) > CONSISTENCY_RTOL * self.gamma_ratio:
                raise ValidationError(
                    f"gamma_ratio {self.gamma_ratio:.15g} inconsistent with eta, gamma, sigma2, q_p "
                    f"(implies {implied:.15g})")

    @classmethod
    def from_db(cls, gamma_db: float, q_p: float) -> "DetectorSpec":
        return cls(gamma_ratio=gamma_from_db(gamma_db), q_p=q_p)

    @property
    def has_physical(self) -> bool:
        return self.eta is not None

    def ratio(self) -> float:
        if self.gamma_ratio is not None:
            return self.gamma_ratio
        if self.q_p is None:
            raise ValidationError("gamma_ratio needs q_p")
        return self.q_p * (self.eta * self.gamma) ** 2 / (8.0 * self.sigma2)


def psi_pos(spectrum: EigenSpectrum, n: int, center: float, edge: float, t: float) -> float:
    """Sampler-slice integral of the positive-mode eigenfunction, time factor included."""
    if not 1 <= n <= spectrum.count:
        raise IndexError(f"mode index {n} outside 1..{spectrum.count}")
    axis = spectrum.axis
    lo, hi = center - 0.5 * edge, center + 0.5 * edge
    _check_slice(axis.length, lo, hi)
    lam = float(spectrum.positive_roots[n - 1])
    b = axis.beta_lo
    bracket = (math.sin(lam * hi) - math.sin(lam * lo)
               - b / lam * (math.cos(lam * hi) - math.cos(lam * lo)))
    return bracket * math.exp(-axis.diffusivity * lam * lam * t) / lam


def psi_neg(spectrum: EigenSpectrum, center: float, edge: float, t: float):
    """Hyperbolic analogue of :func:`psi_pos`; ``None`` without a negative mode."""
    a = spectrum.negative_root
    if a is None:
        return None
    axis = spectrum.axis
    lo, hi = center - 0.5 * edge, center + 0.5 * edge
    _check_slice(axis.length, lo, hi)
    b, L = axis.beta_lo, axis.length
    scaled = float(_scaled_sinh_form(a, b, hi, L) - _scaled_sinh_form(a, b, lo, L))
    # the bracket is carried times exp(-aL); restore it together with the time factor
    return scaled / a * math.exp(a * L - axis.diffusivity * a * a * t)


def _check_slice(length, lo, hi):
    if lo < 0 or hi > length:
        raise ValidationError(f"sampler slice [{lo}, {hi}] outside [0, {length}]")


class SampledConcentration:
    """Sampled concentration for one exhalation field and a set of samplers.

    All samplers share ``sampling_time`` and ``sample_end`` so one nested
    quadrature serves the whole set (location sweeps).
    """

    def __init__(self, field: ExhalationField, surrogate: PlanarSurrogate | str = PlanarSurrogate.EQUAL):
        self.field = field
        self.surrogate = PlanarSurrogate(surrogate)

    def kernel(self, samplers):
        """Unit-rate ``F(s)`` of the equal/lower/upper square seen by every sampler."""
        room = self.field.room
        for smp in samplers:
            smp.check_inside(room)
        half = 0.5 * self.surrogate.side(self.field.source.radius)
        self.field.source.check_inside(room, half)
        bounds = [([s.bounds(k)[0] for s in samplers], [s.bounds(k)[1] for s in samplers]) for k in range(3)]
        receivers = [_Side.of(lo, hi) for lo, hi in bounds]
        return self.field.square_integrand(half, receivers)

    def _common_window(self, samplers):
        windows = {s.window for s in samplers}
        if len(windows) != 1:
            raise ValidationError("samplers in one sweep must share the sampling window")
        return windows.pop()

    def evaluate(self, samplers) -> np.ndarray:
        samplers = list(samplers)
        w_lo, w_hi = self._common_window(samplers)
        src = self.field.source
        if w_hi <= w_lo or w_hi <= src.start or all(s.volume == 0 for s in samplers):
            return np.zeros(len(samplers))
        w_lo = max(w_lo, src.start)
        F = self.kernel(samplers)
        cfg = self.field.quadrature
        inner_cfg = QuadratureConfig(abs_tol=cfg.abs_tol / max(w_hi - w_lo, 1.0),
                                     rel_tol=cfg.rel_tol, gauss_nodes=cfg.gauss_nodes,
                                     max_intervals=cfg.max_intervals)

        def released(t_now):
            lo = t_now - min(t_now, src.end)
            hi = t_now - src.start
            if hi <= 0:
                return np.zeros(len(samplers))
            u_lo, u_hi = math.sqrt(lo), math.sqrt(hi)
            cuts = [u_lo, *[c for c in (math.sqrt(F.split),) if u_lo < c < u_hi], u_hi]
            value = np.zeros(len(samplers))
            for a, b in zip(cuts[:-1], cuts[1:]):
                part, _ = integrate_vector(lambda u: 2.0 * u * F(u * u), a, b, inner_cfg)
                value = value + part
            return value

        # the inner integrand has a kink where the release window stops growing
        cuts = sorted({w_lo, w_hi, *[c for c in (src.end,) if w_lo < c < w_hi]})
        total = np.zeros(len(samplers))
        for a, b in zip(cuts[:-1], cuts[1:]):
            value, _ = integrate_vector(released, a, b, cfg)
            total = total + value
        return src.strength_rate * total

    def overlap_weight(self, s, sampler: SamplerSpec):
        """Length of sample times ``t'`` in the window whose release ``t' - s`` is active."""
        src = self.field.source
        t_lo, t_hi = sampler.window
        lo = max(t_lo, src.start + s)
        hi = min(t_hi, src.end + s)
        return max(0.0, hi - lo)


def sampled_concentration(room: Room, source, sampler: SamplerSpec, quadrature=QuadratureConfig(),
                          surrogate=PlanarSurrogate.EQUAL, **kwargs) -> float:
    field = ExhalationField(room, source, quadrature=quadrature, **kwargs)
    return float(SampledConcentration(field, surrogate).evaluate([sampler])[0])


def ml_threshold(detector: DetectorSpec, c_samp: float) -> float:
    """Decision threshold ``eta gamma C_samp / 2`` for equally likely hypotheses."""
    if c_samp < 0:
        raise ValidationError("c_samp must be non-negative")
    if not detector.has_physical:
        raise ValidationError("the threshold needs eta and gamma")
    return detector.eta * detector.gamma * c_samp / 2.0


def miss_detection_probability(detector: DetectorSpec, c_samp, q_p: float | None = None):
    """``P_md = erfc(eta gamma C / sqrt(8 sigma^2)) / 2 = erfc(sqrt(Gamma C^2 / Q_p)) / 2``.

    This equals the Gaussian right tail at ``eta gamma C / (2 sigma)``, the miss
    rate of the threshold rule. ``q_p`` overrides the detector's own value.
    """
    c = np.asarray(c_samp, dtype=float)
    if np.any(c < 0):
        raise ValidationError("c_samp must be non-negative")
    if q_p is not None and detector.q_p is not None and not math.isclose(q_p, detector.q_p, rel_tol=CONSISTENCY_RTOL):
        raise ValidationError("q_p disagrees with the detector's q_p")
    q = detector.q_p if q_p is None else q_p
    if detector.has_physical and detector.gamma_ratio is None:
        arg = detector.eta * detector.gamma * c / math.sqrt(8.0 * detector.sigma2)
    else:
        if q is None:
            raise ValidationError("the gamma_ratio form needs q_p")
        arg = np.sqrt(detector.ratio() * c * c / q)
    out = 0.5 * erfc(arg)
    return float(out) if out.ndim == 0 else out


def log_miss_detection_probability(detector: DetectorSpec, c_samp, q_p: float | None = None):
    """Natural log of :func:`miss_detection_probability`, finite where the probability underflows."""
    c = np.asarray(c_samp, dtype=float)
    if np.any(c < 0):
        raise ValidationError("c_samp must be non-negative")
    q = detector.q_p if q_p is None else q_p
    if detector.has_physical and detector.gamma_ratio is None:
        arg = detector.eta * detector.gamma * c / math.sqrt(8.0 * detector.sigma2)
    else:
        if q is None:
            raise ValidationError("the gamma_ratio form needs q_p")
        arg = np.sqrt(detector.ratio() * c * c / q)
    # erfc(x) / 2 is the standard normal tail at x sqrt(2)
    out = log_ndtr(-math.sqrt(2.0) * arg)
    return float(out) if out.ndim == 0 else out
