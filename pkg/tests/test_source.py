import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad
from scipy.stats import ncx2

from roomaerosol.eigenspectrum import AxisSpec, solve_spectrum
from roomaerosol.errors import IntegrationError, ValidationError
from roomaerosol.greens import PointSeries, PointSource, Room, weight_neg, weight_pos
from roomaerosol.oracle import quad_adaptive
from roomaerosol.quadrature import QuadratureConfig
from roomaerosol.source import (
    ExhalationField, ExhalationSource, PlanarSurrogate, _AxisKernel, _FreshDisc, _point_receivers, _Side,
    concentration_circular, concentration_square, early_time_limit, free_space_kernel, lhat_neg, lhat_pos)

K = 2.42e-5
ELEVATOR = Room(AxisSpec(1.5, K, 1e-8, 1e-5), AxisSpec(3.0, K, 1e-4, 1e-6), AxisSpec(4.0, K, 1e-1, 1e-7))
REFLECTING = Room(AxisSpec(1.5, K), AxisSpec(3.0, K), AxisSpec(4.0, K))
BREATH = ExhalationSource(0.6, (0.4, 1.5), 0.1, 0.0, 60.0)
TIGHT = QuadratureConfig(abs_tol=1e-16, rel_tol=1e-12)


# -- release-area weights ------------------------------------------------------------

def test_lhat_trivial_cases():
    spec = solve_spectrum(AxisSpec(3.0, K), 3)
    assert lhat_pos(spec, 2, 0.0, 1.0, 1.0) == 0.0
    assert abs(lhat_pos(spec, 1, 0.0, 0.0, 3.0)) < 1e-15
    assert lhat_neg(spec, 0.0, 0.5, 1.0) is None


@pytest.mark.parametrize("n", [1, 2, 7])
def test_lhat_pos_matches_quadrature(n):
    spec = solve_spectrum(AxisSpec(3.0, K, 1e-4, 1e-6), 8)
    tau, lo, hi = 20.0, 0.3, 0.5
    expected, _ = quad_adaptive(lambda y: weight_pos(spec, n, y, tau), lo, hi, abs_tol=1e-13)
    assert lhat_pos(spec, n, tau, lo, hi) == pytest.approx(expected, rel=1e-10)


def test_lhat_neg_matches_quadrature():
    spec = solve_spectrum(AxisSpec(1.5, K, 1e-8, 1e-5), 3)
    assert spec.negative_root is not None
    tau, lo, hi = 30.0, 0.5, 0.7
    expected, _ = quad_adaptive(lambda y: weight_neg(spec, y, tau), lo, hi, abs_tol=1e-14)
    assert lhat_neg(spec, tau, lo, hi) == pytest.approx(expected, rel=1e-10)
    assert lhat_neg(spec, tau, lo, lo) == 0.0


# -- fresh releases ---------------------------------------------------------------------

NEAR_SOURCE = np.array([[0.6, 0.4, 1.5], [0.65, 0.45, 1.55], [0.5, 0.35, 1.45], [0.6, 0.49, 1.5]])


def test_free_space_kernels_match_quadrature():
    s, K_ = 3.0, 2e-5
    w2 = 4 * K_ * s

    def g(r, p):
        return math.exp(-(r - p) ** 2 / w2) / math.sqrt(math.pi * w2)

    point, interval = _Side.of(0.5), _Side.of(0.48, 0.53)
    rcv_pts, rcv_box = _Side.of([0.5, 0.51, 0.56]), _Side.of([0.47, 0.5], [0.5, 0.58])
    expected_pi = [quad(g, 0.48, 0.53, args=(r,), epsabs=0, epsrel=1e-13)[0] for r in rcv_pts.lo]
    expected_ip = [quad(g, lo, hi, args=(0.5,), epsabs=0, epsrel=1e-13)[0] for lo, hi in zip(rcv_box.lo, rcv_box.hi)]
    expected_ii = [quad(lambda r, lo=lo, hi=hi: quad(g, 0.48, 0.53, args=(r,), epsabs=0, epsrel=1e-13)[0],
                        lo, hi, epsabs=0, epsrel=1e-12)[0] for lo, hi in zip(rcv_box.lo, rcv_box.hi)]
    np.testing.assert_allclose(free_space_kernel(point, rcv_pts, s, K_), [g(r, 0.5) for r in rcv_pts.lo], rtol=1e-14)
    np.testing.assert_allclose(free_space_kernel(interval, rcv_pts, s, K_), expected_pi, rtol=1e-11)
    np.testing.assert_allclose(free_space_kernel(point, rcv_box, s, K_), expected_ip, rtol=1e-11)
    np.testing.assert_allclose(free_space_kernel(interval, rcv_box, s, K_), expected_ii, rtol=1e-9)


def test_early_time_limit_keeps_wall_images_negligible():
    axis = ELEVATOR.y
    s = early_time_limit(axis, 0.3, 0.5)
    assert s == pytest.approx(0.3 ** 2 / (4 * K * 60.0))
    assert early_time_limit(axis, 0.0, 0.5) == 0.0
    # a strongly growing wall shortens the limit through the prefactor
    assert early_time_limit(AxisSpec.from_betas(3.0, 0.0, 4e6, diffusivity=K), 0.3, 0.5) < s


@pytest.mark.parametrize("mode", ["exact", "decaying"])
@pytest.mark.parametrize("elapsed", [1.0, 5.0, 15.0])
def test_fresh_square_kernel_matches_mode_sum(mode, elapsed):
    field = ExhalationField(ELEVATOR, BREATH, negative_mode=mode)
    assert elapsed < field.split_time(0.05)
    sources = (_Side.of(0.6), _Side.of(0.35, 0.45), _Side.of(1.45, 1.55))
    axes = [_AxisKernel(m, s, r) for m, s, r in zip(field.models, sources, _point_receivers(NEAR_SOURCE))]
    counts = field.mode_counts(elapsed)
    free = math.prod(ax.free(elapsed) for ax in axes)
    series = math.prod(ax.mode_sum(n, elapsed) for ax, n in zip(axes, counts))
    assert np.max(np.abs(free - series)) < 1e-10 * np.max(np.abs(series))


@pytest.mark.parametrize("mode", ["exact", "decaying"])
def test_fresh_disc_factor_matches_mode_sum(mode):
    field = ExhalationField(ELEVATOR, BREATH, negative_mode=mode)
    elapsed = 10.0
    rc, (yp, zp) = BREATH.radius, BREATH.center
    theta, wts = np.polynomial.legendre.leggauss(field.quadrature.gauss_nodes)
    theta, wts = 0.5 * math.pi * theta, 0.5 * math.pi * wts
    half, dz = rc * np.cos(theta), rc * np.cos(theta) * wts
    _, ry, rz = _point_receivers(NEAR_SOURCE)
    ay = _AxisKernel(field.models[1], _Side.of(yp - half, yp + half), ry)
    az = _AxisKernel(field.models[2], _Side.of(zp + rc * np.sin(theta)), rz)
    fresh = _FreshDisc(field, NEAR_SOURCE, lambda th: rc * np.cos(th), ay, az, theta, dz)(elapsed)
    _, ny, nz = field.mode_counts(elapsed)
    # at 10 s the kernel spans several ordinary nodes, so the plain rule still resolves it
    series = (ay.mode_sum(ny, elapsed) * az.mode_sum(nz, elapsed)) @ dz
    np.testing.assert_allclose(fresh, series, rtol=2e-3)


@pytest.mark.parametrize("elapsed", [1e-6, 1e-2, 10.0])
def test_fresh_disc_factor_matches_noncentral_chi_square(elapsed):
    # equal y and z diffusivities make the free-space disc integral a Rice distribution
    field = ExhalationField(ELEVATOR, BREATH, negative_mode="exact")
    rc, (yp, zp) = BREATH.radius, BREATH.center
    pts = np.array([[0.6, 0.4, 1.5], [0.6, 0.45, 1.55], [0.6, 0.4 + 0.0999, 1.5], [0.6, 0.47, 1.58]])
    _, ry, rz = _point_receivers(pts)
    theta = np.linspace(-1.5, 1.5, 8)
    ay = _AxisKernel(field.models[1], _Side.of(yp - rc * np.cos(theta), yp + rc * np.cos(theta)), ry)
    az = _AxisKernel(field.models[2], _Side.of(zp + rc * np.sin(theta)), rz)
    got = _FreshDisc(field, pts, lambda th: rc * np.cos(th), ay, az, theta, np.zeros_like(theta))(elapsed)
    var = 2 * K * elapsed
    rho2 = (pts[:, 1] - yp) ** 2 + (pts[:, 2] - zp) ** 2
    expected = ncx2.cdf(rc ** 2 / var, 2, rho2 / var)
    np.testing.assert_allclose(got, expected, rtol=1e-9, atol=1e-13)


# -- circular and square emitters ------------------------------------------------------

def test_zero_before_emission_and_for_degenerate_area():
    field = ExhalationField(ELEVATOR, ExhalationSource(0.6, (0.4, 1.5), 0.1, 10.0, 60.0))
    pts = np.array([[0.7, 0.4, 1.5]])
    assert field.circular(pts, 10.0)[0] == 0.0
    assert field.square(pts, 5.0, "upper")[0] == 0.0
    empty = ExhalationField(ELEVATOR, ExhalationSource(0.6, (0.4, 1.5), 0.0, 0.0, 60.0))
    assert empty.square(pts, 100.0, "equal")[0] == 0.0
    assert empty.circular(pts, 100.0)[0] == 0.0


def test_small_disc_tends_to_integrated_point_source():
    pts = np.array([[0.7, 0.45, 1.55], [0.6, 0.4, 1.5]])
    t = 120.0
    series = PointSeries(ELEVATOR, negative_mode="exact")

    def point_release(tau, p):
        return float(series.evaluate(PointSource((0.6, 0.4, 1.5), 1.0, tau), p[None, :], t)[0])

    reference = np.array([quad(point_release, 0.0, 60.0, args=(p,), epsabs=0, epsrel=1e-12, limit=500)[0]
                          for p in pts])
    deviations = []
    for radius in (1e-3, 5e-4):
        src = ExhalationSource(0.6, (0.4, 1.5), radius, 0.0, 60.0)
        disc = ExhalationField(ELEVATOR, src, quadrature=TIGHT, negative_mode="exact").circular(pts, t)
        deviations.append(np.abs(disc / (math.pi * radius ** 2) - reference) / reference)
    assert np.all(deviations[0] < 1e-4)
    # the finite-disc correction is second order in the radius
    np.testing.assert_allclose(deviations[0] / deviations[1], 4.0, rtol=0.05)


def test_square_matches_disc_path_with_constant_half_width():
    field = ExhalationField(ELEVATOR, BREATH, negative_mode="exact")
    pts = np.array([[0.7, 0.4, 1.5], [0.3, 1.0, 2.0], [1.2, 0.2, 1.4]])
    square = field.square(pts, 300.0, PlanarSurrogate.UPPER)
    banded = field.circular(pts, 300.0, constant_half_width=True)
    np.testing.assert_allclose(square, banded, rtol=1e-8, atol=2e-10)


@settings(max_examples=40, deadline=None)
@given(st.floats(min_value=0.0, max_value=1.5), st.floats(min_value=0.0, max_value=3.0),
       st.floats(min_value=0.0, max_value=4.0), st.floats(min_value=1.0, max_value=900.0))
def test_bound_ordering(x, y, z, t):
    field = ExhalationField(ELEVATOR, BREATH, negative_mode="exact")
    pts = np.array([[x, y, z]])
    lower, equal, upper = (field.square(pts, t, s)[0] for s in ("lower", "equal", "upper"))
    disc = field.circular(pts, t)[0]
    tol = 3 * field.quadrature.abs_tol
    assert lower <= disc + tol and disc <= upper + tol
    assert lower <= equal + tol and equal <= upper + tol


@given(st.floats(min_value=1e-3, max_value=1e6))
@settings(max_examples=10, deadline=None)
def test_linear_in_strength_rate(rate):
    pts = np.array([[0.7, 0.4, 1.5], [1.0, 1.0, 1.0]])
    one = ExhalationField(ELEVATOR, BREATH, negative_mode="exact").square(pts, 200.0, "equal")
    src = ExhalationSource(0.6, (0.4, 1.5), 0.1, 0.0, 60.0, strength_rate=rate)
    scaled = ExhalationField(ELEVATOR, src, negative_mode="exact").square(pts, 200.0, "equal")
    np.testing.assert_allclose(scaled, rate * one, rtol=1e-13)


def test_accumulates_while_emitting_in_reflecting_room():
    field = ExhalationField(REFLECTING, ExhalationSource(0.6, (0.4, 1.5), 0.1, 0.0, 600.0))
    centre = np.array([[0.6, 0.4, 1.5]])
    values = [field.circular(centre, t)[0] for t in (5.0, 20.0, 60.0, 200.0, 590.0)]
    assert np.all(np.diff(values) > 0)


def test_module_helpers_broadcast():
    x = np.array([0.7, 0.8])
    circ = concentration_circular(ELEVATOR, BREATH, x, 0.4, 1.5, 120.0, negative_mode="exact")
    sq = concentration_square(ELEVATOR, BREATH, "equal", x, 0.4, 1.5, 120.0, negative_mode="exact")
    assert circ.shape == sq.shape == (2,)
    np.testing.assert_allclose(circ, sq, rtol=5e-2)


def test_source_geometry_validated():
    with pytest.raises(ValidationError):
        ExhalationField(ELEVATOR, ExhalationSource(0.6, (0.05, 1.5), 0.1, 0.0, 60.0))
    with pytest.raises(ValidationError):
        ExhalationSource(0.6, (0.4, 1.5), 0.1, 60.0, 60.0)
    field = ExhalationField(ELEVATOR, ExhalationSource(0.6, (0.1, 1.5), 0.1, 0.0, 60.0))
    with pytest.raises(ValidationError):
        field.square(np.array([[0.7, 0.4, 1.5]]), 100.0, "upper", side=0.25)
    with pytest.raises(ValidationError):
        field.circular(np.array([[2.0, 0.4, 1.5]]), 100.0)


def test_integration_failure_reports_estimate():
    cfg = QuadratureConfig(abs_tol=1e-30, rel_tol=0.0, max_intervals=10)
    field = ExhalationField(ELEVATOR, BREATH, quadrature=cfg, negative_mode="exact")
    with pytest.raises(IntegrationError) as info:
        field.circular(np.array([[0.65, 0.4, 1.5]]), 61.0)
    assert info.value.estimate is not None
