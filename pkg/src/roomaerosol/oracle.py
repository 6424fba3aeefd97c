"""Independent reference computations used to validate the series solution.

Nothing here imports the spectral code: the finite-difference solvers only see
an :class:`AxisSpec` and a sampled field, the adaptive Simpson rule only an
integrand, and the Monte Carlo helper only the detection parameters.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.sparse import diags
from scipy.sparse.linalg import splu

from .eigenspectrum import AxisSpec
from .errors import IntegrationError, OracleError, ValidationError


@dataclass(frozen=True)
class GridConfig:
    """Node count per axis (``h = L / (nodes - 1)``) and the time-step cap."""

    nodes: int = 2001
    dt: float = 0.05

    def __post_init__(self):
        if self.nodes < 3:
            raise ValidationError("finite-difference grid needs at least 3 nodes")
        if not self.dt > 0:
            raise ValidationError("time step must be positive")


def grid_nodes(axis: AxisSpec, nodes: int) -> np.ndarray:
    return np.linspace(0.0, axis.length, nodes)


def robin_operator(axis: AxisSpec, nodes: int):
    """``K d^2/dnu^2`` on the nodes with ghost-node Robin closure.

    The ghost values come from the centred conditions
    ``(C_{-1} - C_1) / 2h = -b1 C_0`` and ``(C_{N} - C_{N-2}) / 2h = b2 C_{N-1}``,
    i.e. ``dC/dnu = b1 C`` at 0 and ``dC/dnu = b2 C`` at L.
    """
    h = axis.length / (nodes - 1)
    main = np.full(nodes, -2.0)
    upper = np.ones(nodes - 1)
    lower = np.ones(nodes - 1)
    upper[0] = 2.0
    lower[-1] = 2.0
    main[0] -= 2.0 * h * axis.beta_lo
    main[-1] += 2.0 * h * axis.beta_hi
    scale = axis.diffusivity / (h * h)
    return diags([lower * scale, main * scale, upper * scale], [-1, 0, 1], format="csc")


def trapezoid_weights(axis: AxisSpec, nodes: int) -> np.ndarray:
    """Quadrature weights under which the all-reflecting operator conserves mass."""
    h = axis.length / (nodes - 1)
    w = np.full(nodes, h)
    w[0] = w[-1] = 0.5 * h
    return w


class _CrankNicolsonAxis:
    """One-axis Crank-Nicolson propagator with a Thomas factorisation computed once.

    The solve sweeps along one array axis of an n-d field; every other axis is an
    independent line, so the recurrences run on whole slabs at a time.
    """

    def __init__(self, axis: AxisSpec, nodes: int, dt: float):
        op = robin_operator(axis, nodes).todia()
        offsets = list(op.offsets)
        data = {k: op.data[offsets.index(k)] for k in (-1, 0, 1)}
        # dia storage: data[k][j] holds A[j - k, j]
        sub = data[-1][:-1]
        diag = data[0]
        sup = data[1][1:]
        half = 0.5 * dt
        self.ex = (half * sub, 1.0 + half * diag, half * sup)
        a, b, c = -half * sub, 1.0 - half * diag, -half * sup
        pivot = np.empty(nodes)
        upper = np.empty(nodes - 1)
        pivot[0] = b[0]
        for i in range(1, nodes):
            if pivot[i - 1] == 0.0 or not np.isfinite(pivot[i - 1]):
                raise OracleError(f"Crank-Nicolson matrix has a zero pivot at row {i - 1}")
            upper[i - 1] = c[i - 1] / pivot[i - 1]
            pivot[i] = b[i] - a[i - 1] * upper[i - 1]
        if pivot[-1] == 0.0:
            raise OracleError("Crank-Nicolson matrix has a zero pivot at the last row")
        self.lu = splu(diags([a, b, c], [-1, 0, 1], format="csc"))
        self.sub = a
        self.pivot = pivot
        self.upper = upper
        self.nodes = nodes

    def step(self, field: np.ndarray, axis: int = 0) -> np.ndarray:
        """Advance ``field`` one step along ``axis``."""
        # overflow is reported by the callers' finiteness checks
        with np.errstate(over="ignore", invalid="ignore"):
            return self._step(field, axis)

    def _step(self, field, axis):
        f = np.moveaxis(field, axis, 0)
        lo, mid, hi = self.ex
        shape = (-1,) + (1,) * (f.ndim - 1)
        rhs = np.multiply(mid.reshape(shape), f, order="C")
        rhs[1:] += lo.reshape(shape) * f[:-1]
        rhs[:-1] += hi.reshape(shape) * f[1:]
        if f.ndim == 1:
            return self.lu.solve(rhs)
        rhs[0] /= self.pivot[0]
        for i in range(1, self.nodes):
            rhs[i] -= self.sub[i - 1] * rhs[i - 1]
            rhs[i] /= self.pivot[i]
        for i in range(self.nodes - 2, -1, -1):
            rhs[i] -= self.upper[i] * rhs[i + 1]
        return np.moveaxis(rhs, 0, axis)


def _steps(t_span, dt):
    t_start, t_end = map(float, t_span)
    if t_end < t_start:
        raise ValidationError("t_span must be increasing")
    if t_end == t_start:
        return 0, 0.0
    count = max(1, math.ceil((t_end - t_start) / dt - 1e-9))
    return count, (t_end - t_start) / count


def _check_finite(field, t):
    if not np.all(np.isfinite(field)):
        raise OracleError(f"finite-difference field became non-finite before t={t:g}")


def fdm_evolve_1d(axis: AxisSpec, initial, t_span, grid: GridConfig = GridConfig()) -> np.ndarray:
    """Crank-Nicolson evolution of ``initial`` (values on :func:`grid_nodes`) over ``t_span``."""
    field = np.array(initial, dtype=float)
    if field.shape != (grid.nodes,):
        raise ValidationError(f"initial field must have {grid.nodes} nodes, got {field.shape}")
    if not np.all(np.isfinite(field)):
        raise ValidationError("initial field must be finite")
    count, dt = _steps(t_span, grid.dt)
    if count == 0:
        return field
    cn = _CrankNicolsonAxis(axis, grid.nodes, dt)
    for k in range(count):
        field = cn.step(field)
        if k % 64 == 63:
            _check_finite(field, t_span[0] + (k + 1) * dt)
    _check_finite(field, t_span[1])
    return field


def fdm_evolve_3d(axes, initial, t_span, nodes, dt: float) -> np.ndarray:
    """Locally one-dimensional Crank-Nicolson (x, then y, then z) per time step.

    ``axes`` are the three :class:`AxisSpec`, ``nodes`` the per-axis node counts
    and ``initial`` an array of shape ``nodes``.
    """
    axes = tuple(axes)
    nodes = tuple(int(n) for n in nodes)
    field = np.array(initial, dtype=float)
    if field.shape != nodes or len(axes) != 3:
        raise ValidationError(f"initial field shape {field.shape} does not match nodes {nodes}")
    if not np.all(np.isfinite(field)):
        raise ValidationError("initial field must be finite")
    count, step = _steps(t_span, dt)
    if count == 0:
        return field
    solvers = [_CrankNicolsonAxis(a, n, step) for a, n in zip(axes, nodes)]
    for k in range(count):
        for ax, cn in enumerate(solvers):
            field = cn.step(field, ax)
        if k % 16 == 15:
            _check_finite(field, t_span[0] + (k + 1) * step)
    _check_finite(field, t_span[1])
    return np.ascontiguousarray(field)


def quad_adaptive(func, a: float, b: float, abs_tol: float = 1e-10, max_intervals: int = 200_000):
    """Adaptive Simpson rule with Richardson correction.

    ``func`` may return arrays; panels are refined on the largest component.
    Returns ``(value, error_estimate)``. Raises :class:`IntegrationError` when the
    interval budget runs out before every panel meets its share of ``abs_tol``.
    """
    a, b = float(a), float(b)
    if a == b:
        return 0.0, 0.0
    sign = 1.0
    if b < a:
        a, b, sign = b, a, -1.0
    fa, fm, fb = func(a), func(0.5 * (a + b)), func(b)
    whole = (b - a) * (fa + 4.0 * fm + fb) / 6.0
    stack = [(a, b, fa, fm, fb, whole, abs_tol, 0)]
    total = 0.0
    err = 0.0
    used = 1
    while stack:
        lo, hi, flo, fmid, fhi, est, tol, depth = stack.pop()
        mid = 0.5 * (lo + hi)
        fl, fr = func(0.5 * (lo + mid)), func(0.5 * (mid + hi))
        left = (mid - lo) * (flo + 4.0 * fl + fmid) / 6.0
        right = (hi - mid) * (fmid + 4.0 * fr + fhi) / 6.0
        diff = left + right - est
        size = float(np.max(np.abs(diff)))
        if size <= 15.0 * tol or depth >= 60:
            total = total + left + right + diff / 15.0
            err += size / 15.0
            continue
        used += 1
        if used > max_intervals:
            raise IntegrationError("adaptive Simpson exhausted its interval budget",
                                   estimate=sign * (total + left + right), error=err + size)
        stack.append((mid, hi, fmid, fr, fhi, right, 0.5 * tol, depth + 1))
        stack.append((lo, mid, flo, fl, fmid, left, 0.5 * tol, depth + 1))
    return sign * total, err


def miss_detection_monte_carlo(eta, gamma, sigma2, c_samp, draws=10_000_000, seed=0, chunk=1_000_000):
    """Empirical miss rate of the ML rule ``C_r <= eta gamma C_samp / 2`` under presence.

    Returns ``(frequency, standard_error)``.
    """
    rng = np.random.default_rng(seed)
    signal = eta * gamma * c_samp
    threshold = 0.5 * signal
    sigma = math.sqrt(sigma2)
    misses = 0
    left = int(draws)
    while left > 0:
        n = min(chunk, left)
        received = signal + sigma * rng.standard_normal(n)
        misses += int(np.count_nonzero(received <= threshold))
        left -= n
    p = misses / draws
    return p, math.sqrt(max(p * (1.0 - p), 1.0 / draws) / draws)
