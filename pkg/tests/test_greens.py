import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from roomaerosol.eigenspectrum import AxisSpec, solve_spectrum
from roomaerosol.errors import SolverError, ValidationError
from roomaerosol.greens import (
    AxisModel, ModeBasis, PointSeries, PointSource, Room, concentration_1d, concentration_point_3d,
    eigenfunction_neg, eigenfunction_pos, mode_weights, weight_neg, weight_pos, weight_zero)
from roomaerosol.oracle import quad_adaptive
from roomaerosol.scenario import analytic_residuals

K = 2.42e-5


def reflecting(length=1.0):
    return AxisSpec(length, K, 0.0, 0.0)


def field_1d(model, position, nu, t, strength=1.0):
    basis = model.basis(model.modes_needed(t))
    return concentration_1d(basis, mode_weights(basis, position, 0.0, strength), nu, t)


# -- eigenfunctions -----------------------------------------------------------------

def test_eigenfunction_trivial_values():
    spec = solve_spectrum(reflecting(), 2)
    assert eigenfunction_pos(spec, 1, 0.0, 0.0) == 1.0
    assert abs(eigenfunction_pos(spec, 1, 0.5, 0.0)) < 1e-15


def test_eigenfunction_matches_extended_precision(reflecting_absorbing_axis):
    spec = solve_spectrum(reflecting_absorbing_axis, 3)
    lam = mp.mpf(float(spec.positive_roots[0]))
    beta = mp.mpf(1e-7) / mp.mpf(2.42e-5)
    with mp.workdps(40):
        ref = (mp.cos(lam * mp.mpf(0.25)) + beta / lam * mp.sin(lam * mp.mpf(0.25))) \
            * mp.exp(-mp.mpf(2.42e-5) * lam ** 2 * 60)
    assert eigenfunction_pos(spec, 1, 0.25, 60.0) == pytest.approx(float(ref), rel=1e-14)


def test_eigenfunction_index_checked(reflecting_absorbing_axis):
    spec = solve_spectrum(reflecting_absorbing_axis, 3)
    with pytest.raises(IndexError):
        eigenfunction_pos(spec, 4, 0.1, 0.0)
    assert eigenfunction_neg(spec, 0.1, 0.0) is not None
    assert eigenfunction_neg(solve_spectrum(reflecting(), 3), 0.1, 0.0) is None


# -- weights ------------------------------------------------------------------------

def test_neumann_weight_reduces_to_cosine():
    spec = solve_spectrum(reflecting(), 2)
    assert weight_pos(spec, 2, 0.5, 0.0, strength=3.0) == pytest.approx(-2 * 3.0 / 1.0, rel=1e-14)


@pytest.mark.parametrize("n", [1, 2, 3, 4, 5])
def test_positive_weight_matches_orthogonality_quadrature(reflecting_absorbing_axis, n):
    spec = solve_spectrum(reflecting_absorbing_axis, 5)
    lam = float(spec.positive_roots[n - 1])
    b = reflecting_absorbing_axis.beta_lo

    def shape(v):
        return math.cos(lam * v) + b / lam * math.sin(lam * v)

    norm2, _ = quad_adaptive(lambda v: shape(v) ** 2, 0.0, 1.0, abs_tol=1e-14)
    expected = shape(0.5) / norm2
    assert weight_pos(spec, n, 0.5) == pytest.approx(expected, rel=1e-10)


@pytest.mark.parametrize("position", [0.5, 0.999])
def test_negative_weight_matches_orthogonality_quadrature(position):
    axis = AxisSpec.from_betas(1.0, 0.004132, 4132.2)
    spec = solve_spectrum(axis, 3)
    a = spec.negative_root
    b = axis.beta_lo

    def scaled_shape(v):
        # (cosh(a v) + (b/a) sinh(a v)) exp(-a L), written without overflow
        return 0.5 * ((1 + b / a) * math.exp(a * (v - 1.0)) + (1 - b / a) * math.exp(-a * (v + 1.0)))

    edge = 1.0 - 60.0 / a
    head, _ = quad_adaptive(lambda v: scaled_shape(v) ** 2, 0.0, edge, abs_tol=1e-30)
    tail, _ = quad_adaptive(lambda v: scaled_shape(v) ** 2, edge, 1.0, abs_tol=1e-17)
    expected = scaled_shape(position) / (head + tail)
    got = weight_neg(spec, position, scaled=True)
    assert got == pytest.approx(expected, rel=1e-10, abs=1e-300)


def test_negative_weight_release_shift(reflecting_absorbing_axis):
    axis = AxisSpec.from_betas(1.0, 0.5, 2.0, diffusivity=K)
    spec = solve_spectrum(axis, 3)
    a = spec.negative_root
    ratio = weight_neg(spec, 0.3, 100.0) / weight_neg(spec, 0.3, 0.0)
    assert ratio == pytest.approx(math.exp(K * a * a * 100.0), rel=1e-13)
    assert weight_neg(solve_spectrum(reflecting(), 3), 0.3) is None


@given(st.floats(min_value=1e-3, max_value=1e3))
def test_weights_linear_in_strength(q):
    axis = AxisSpec(1.0, K, 1e-6, 1e-3)
    basis = AxisModel(axis).basis(20)
    one = mode_weights(basis, 0.4).vector()
    np.testing.assert_allclose(mode_weights(basis, 0.4, strength=q).vector(), q * one, rtol=1e-14)


def test_zero_weight_is_uniform_for_reflecting_axis():
    spec = solve_spectrum(reflecting(2.0), 3)
    assert weight_zero(spec, 0.7, strength=4.0) == pytest.approx(2.0)


# -- 1-D series -----------------------------------------------------------------------

def test_series_zero_before_release_and_undefined_at_release(reflecting_absorbing_axis):
    basis = AxisModel(reflecting_absorbing_axis).basis(30)
    w = mode_weights(basis, 0.5, release_time=10.0)
    assert np.all(concentration_1d(basis, w, [0.1, 0.9], 5.0) == 0)
    with pytest.raises(ValidationError):
        concentration_1d(basis, w, 0.1, 10.0)


def test_reflecting_axis_tends_to_uniform():
    model = AxisModel(reflecting(1.0))
    values = field_1d(model, 0.3, np.linspace(0, 1, 11), 1e6, strength=2.0)
    np.testing.assert_allclose(values, 2.0, rtol=1e-12)


def test_point_3d_tends_to_uniform():
    room = Room(reflecting(1.5), reflecting(3.0), reflecting(4.0))
    value = concentration_point_3d(room, PointSource((0.6, 0.4, 1.5), 9.0), 1.0, 2.0, 3.0, 1e7)
    assert value == pytest.approx(9.0 / room.volume, rel=1e-10)


def test_point_source_on_wall_rejected():
    room = Room(reflecting(1.0))
    with pytest.raises(ValidationError):
        PointSeries(room).evaluate(PointSource((0.0,)), np.array([[0.5]]), 10.0)


def test_series_nonnegative_one_second_after_release(reflecting_absorbing_axis):
    model = AxisModel(reflecting_absorbing_axis)
    count = model.modes_needed(1.0)
    values = field_1d(model, 0.5, np.linspace(0, 1, 2001), 1.0)
    # |truncation error| <= sum over dropped modes of max|V|^2 / ||V||^2 exp(-rate s)
    big = model.basis(4 * count)
    dropped = (big.amplitude_envelope() * np.exp(-big.rates[: big.n_pos]))[count:].sum()
    assert values.min() >= -dropped
    assert dropped < 1e-10 * values.max()


def test_modes_needed_shrinks_with_time(reflecting_absorbing_axis):
    model = AxisModel(reflecting_absorbing_axis)
    counts = [model.modes_needed(t) for t in (1.0, 10.0, 60.0, 600.0)]
    assert counts == sorted(counts, reverse=True)
    assert counts[-1] >= 16


@settings(max_examples=25, deadline=None)
@given(st.floats(min_value=0.05, max_value=0.95), st.floats(min_value=1.0, max_value=5000.0))
def test_mass_conserved_on_reflecting_axis(position, t):
    model = AxisModel(reflecting(1.0))
    basis = model.basis(model.modes_needed(t))
    w = mode_weights(basis, position)
    # breakpoints around the source so the early narrow peak is sampled
    width = 10 * math.sqrt(2 * K * t)
    cuts = sorted({0.0, 1.0, *(min(max(position + d, 0.0), 1.0) for d in (-width, 0.0, width))})
    mass = sum(quad_adaptive(lambda v: float(concentration_1d(basis, w, v, t)), lo, hi, abs_tol=1e-11)[0]
               for lo, hi in zip(cuts[:-1], cuts[1:]))
    assert mass == pytest.approx(1.0, rel=1e-8)


@settings(max_examples=40, deadline=None)
@given(st.floats(min_value=-6, max_value=1), st.floats(min_value=0.01, max_value=0.99),
       st.floats(min_value=0.01, max_value=0.99), st.floats(min_value=5.0, max_value=3000.0))
def test_symmetry_for_equal_walls(log_d, source, receiver, t):
    axis = AxisSpec(1.0, K, 10 ** log_d, 10 ** log_d)
    model = AxisModel(axis)
    forward = field_1d(model, source, receiver, t)
    backward = field_1d(model, receiver, source, t)
    peak = max(field_1d(model, source, source, t), field_1d(model, receiver, receiver, t))
    assert abs(forward - backward) <= 1e-10 * peak


def test_exact_negative_mode_solves_the_equation():
    axis = AxisSpec(1.5, K, 1e-8, 1e-5)
    exact = analytic_residuals(AxisModel(axis, negative_mode="exact"), 0.6, 600.0)
    assert max(exact) < 1e-12
    decaying = analytic_residuals(AxisModel(axis, negative_mode="decaying"), 0.6, 600.0)
    # the decaying time factor breaks the equation for a live negative mode
    assert decaying[0] > 1e-6


def test_exact_negative_mode_overflow_is_reported():
    axis = AxisSpec(1.0, K, 1e-8, 1e-2)
    basis = AxisModel(axis, negative_mode="exact").basis(20)
    with pytest.raises(SolverError):
        basis.decay(600.0)


def test_basis_cache_slices_larger_spectrum(reflecting_absorbing_axis):
    model = AxisModel(reflecting_absorbing_axis)
    big = model.basis(64)
    small = model.basis(10)
    np.testing.assert_array_equal(small.lam, big.lam[:10])
    assert isinstance(small, ModeBasis)


def test_separable_product_solves_3d_equation():
    room = Room(AxisSpec(1.5, K, 1e-8, 1e-5), AxisSpec(3.0, K, 1e-4, 1e-6), AxisSpec(4.0, K, 1e-1, 1e-7))
    series = PointSeries(room, negative_mode="exact")
    src = PointSource((0.6, 0.4, 1.5))
    h, dt, t = 2e-3, 1.0, 300.0
    centre = np.array([0.7, 0.5, 1.6])

    def c(point, when):
        return float(series.evaluate(src, np.asarray(point)[None, :], when)[0])

    c_t = (-c(centre, t + 2 * dt) + 8 * c(centre, t + dt) - 8 * c(centre, t - dt) + c(centre, t - 2 * dt)) / (12 * dt)
    lap = 0.0
    for k in range(3):
        e = np.zeros(3)
        e[k] = h
        lap += (-c(centre + 2 * e, t) + 16 * c(centre + e, t) - 30 * c(centre, t) + 16 * c(centre - e, t)
                - c(centre - 2 * e, t)) / (12 * h * h)
    assert abs(c_t - K * lap) < 1e-6 * abs(c_t)
