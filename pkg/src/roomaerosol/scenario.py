"""Scenario orchestration: config in, deterministic CSV tables out.

Each ``run_*`` function returns a list of :class:`Table`; :func:`write_tables`
writes them with a comment header that records the config hash, solver
tolerances and the mode counts actually used.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .config import ScenarioConfig
from .detection import DetectorSpec, SampledConcentration, SamplerSpec, gamma_from_db, miss_detection_probability
from .errors import SolverError, ValidationError
from .greens import AxisModel, PointSeries, PointSource, mode_weights
from .oracle import GridConfig as FdmGrid
from .oracle import fdm_evolve_1d, fdm_evolve_3d, grid_nodes
from .quadrature import QuadratureConfig
from .source import ExhalationField, ExhalationSource, PlanarSurrogate

SURROGATE_CHOICES = ("lower", "equal", "upper", "circular")


@dataclass
class Table:
    name: str
    columns: list[str]
    rows: list[tuple] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)

    def to_csv(self, header: list[str]) -> str:
        buf = io.StringIO()
        for line in header + self.notes:
            buf.write(f"# {line}\n")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.columns)
        for row in self.rows:
            writer.writerow([_fmt(v) for v in row])
        return buf.getvalue()


def _fmt(value):
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return "" if value is None else str(value)


# -- context ------------------------------------------------------------------

class Context:
    """Resolved objects shared by all commands for one config."""

    def __init__(self, config: ScenarioConfig, threads: int = 1):
        self.config = config
        self.threads = max(1, int(threads))
        self.room = config.room.build()
        s = config.solver
        self.models = [AxisModel(a, tol=s.tol, degenerate_tol=s.degenerate_tol, negative_mode=s.negative_mode,
                                 max_modes=s.max_modes) for a in self.room.axes]
        q = s.quadrature
        self.quadrature = QuadratureConfig(q.abs_tol, q.rel_tol, q.gauss_nodes, q.max_intervals)

    def header(self, command: str) -> list[str]:
        s = self.config.solver
        q = s.quadrature
        return [
            f"roomaerosol {__version__} {command}",
            f"config {self.config.name} sha256={self.config.sha256()}",
            f"solver tol={s.tol!r} degenerate_tol={s.degenerate_tol!r} tail_tol={s.tail_tol!r} "
            f"max_modes={s.max_modes} modes={s.modes if s.modes is not None else 'adaptive'} "
            f"negative_mode={s.negative_mode}",
            f"quadrature abs_tol={q.abs_tol!r} rel_tol={q.rel_tol!r} gauss_nodes={q.gauss_nodes}",
        ]

    def point_sources(self):
        out = []
        for i, src in enumerate(self.config.sources):
            if src.kind == "point":
                ps = PointSource(tuple(src.position), src.strength, src.release_time)
                try:
                    ps.check_inside(self.room)
                except ValidationError as exc:
                    raise ValidationError(f"sources[{i}]: {exc}") from None
                out.append((i, ps))
        return out

    def exhalations(self):
        out = []
        for i, src in enumerate(self.config.sources):
            if src.kind == "exhalation":
                ex = ExhalationSource(src.plane_x, tuple(src.center), src.radius, src.start, src.end,
                                      src.strength_rate)
                try:
                    ex.check_inside(self.room)
                except ValidationError as exc:
                    raise ValidationError(f"sources[{i}]: {exc}") from None
                out.append((i, ex))
        return out

    def series(self):
        s = self.config.solver
        return PointSeries(self.room, modes=s.modes, tail_tol=s.tail_tol, models=self.models)

    def exhalation_field(self, source):
        s = self.config.solver
        return ExhalationField(self.room, source, modes=s.modes, quadrature=self.quadrature,
                               tail_tol=s.tail_tol, models=self.models)

    def map(self, func, items):
        items = list(items)
        if self.threads == 1 or len(items) < 2:
            return [func(i) for i in items]
        with ThreadPoolExecutor(max_workers=self.threads) as pool:
            return list(pool.map(func, items))

    def require(self, section: str):
        value = getattr(self.config, section)
        if value is None:
            raise ValidationError(f"config has no '{section}' section")
        return value


def _modes_note(label, bases):
    return f"modes[{label}] " + " ".join(f"{'xyz'[k]}={b.n_pos}" for k, b in enumerate(bases))


def _mode_range_note(label, field, window):
    """Per-axis mode counts at the oldest and the newest release in ``window`` that uses mode sums."""
    split = field.split_time()
    if window[1] <= split:
        return f"modes[{label}] free-space kernels only (releases younger than {split:.6g} s)"
    fewest, most = field.mode_counts(window[1]), field.mode_counts(max(window[0], split))
    note = f"modes[{label}] " + " ".join(
        f"{'xyz'[k]}={lo}" if lo == hi else f"{'xyz'[k]}={lo}..{hi}" for k, (lo, hi) in enumerate(zip(fewest, most)))
    if window[0] < split:
        note += f"; free-space kernels below {split:.6g} s"
    return note


def _check_points(room, pts, label):
    for k, axis in enumerate(room.axes):
        if np.any(pts[:, k] < 0) or np.any(pts[:, k] > axis.length):
            raise ValidationError(f"grid {label} leaves the room along {'xyz'[k]}")


def _coords(pt, dims):
    return tuple(float(pt[k]) if k < dims else None for k in range(3))


# -- commands -----------------------------------------------------------------

def run_spectrum(ctx: Context, count: int | None = None) -> list[Table]:
    count = count or ctx.config.solver.modes or 50
    sources = ctx.point_sources()
    table = Table("spectrum", ["axis", "kind", "index", "eigenvalue", "norm2", "weight"])
    for k, model in enumerate(ctx.models):
        basis = model.basis(count)
        weights = None
        if sources:
            weights = mode_weights(basis, sources[0][1].position[k]).vector()
        spec = basis.spectrum
        kinds = [("positive", i + 1, float(lam)) for i, lam in enumerate(spec.positive_roots)]
        if spec.negative_root is not None:
            kinds.append(("negative", 1, spec.negative_root))
        if spec.zero_mode:
            kinds.append(("zero", 0, 0.0))
        for m, (kind, idx, lam) in enumerate(kinds):
            norm = basis.norm2[m]
            if kind == "negative":
                # stored scaled by exp(-2 lt L); report the log-free true value when finite
                with np.errstate(over="ignore"):
                    norm = float(norm * np.exp(2.0 * lam * basis.length))
            w = None if weights is None else float(weights[m])
            table.rows.append(("xyz"[k], kind, idx, lam, norm, w))
    if sources:
        table.notes.append(f"weights are for sources[{sources[0][0]}] with the release-time factor cancelled")
    table.notes.append("negative-mode weight is scaled by exp(lt L) to stay finite")
    return [table]


def run_point(ctx: Context) -> list[Table]:
    grid = ctx.require("grid")
    sources = ctx.point_sources()
    if not sources:
        raise ValidationError("the point command needs a source of kind 'point'")
    dims = ctx.room.dims
    blocks = grid.blocks(dims)
    for label, pts in blocks:
        _check_points(ctx.room, pts, label)
    series = ctx.series()
    table = Table("point", ["source", "block", "time", "x", "y", "z", "concentration"])

    def one(job):
        (i, src), t = job
        rows = []
        notes = []
        if t > src.release_time:
            notes.append(_modes_note(f"source={i},t={t!r}", series.bases(t - src.release_time)))
        for label, pts in blocks:
            vals = series.evaluate(src, pts, t)
            rows.extend((i, label, t, *_coords(p, dims), float(v)) for p, v in zip(pts, vals))
        return rows, notes

    for rows, notes in ctx.map(one, [(s, t) for s in sources for t in grid.times]):
        table.rows.extend(rows)
        table.notes.extend(notes)
    return [table]


def run_breath(ctx: Context, surrogates=("circular",)) -> list[Table]:
    grid = ctx.require("grid")
    sources = ctx.exhalations()
    if not sources:
        raise ValidationError("the breath command needs a source of kind 'exhalation'")
    for s in surrogates:
        if s not in SURROGATE_CHOICES:
            raise ValidationError(f"unknown surrogate {s!r}; choose from {SURROGATE_CHOICES}")
    blocks = grid.blocks(3)
    for label, pts in blocks:
        _check_points(ctx.room, pts, label)
    table = Table("breath", ["source", "block", "time", "x", "y", "z", "variant", "concentration"])

    def one(job):
        (i, src), t = job
        fld = ctx.exhalation_field(src)
        rows = []
        notes = []
        window = fld.active_window(t)
        if window is not None:
            notes.append(_mode_range_note(f"source={i},t={t!r}", fld, window))
        for label, pts in blocks:
            for variant in surrogates:
                vals = fld.circular(pts, t) if variant == "circular" else fld.square(pts, t, variant)
                rows.extend((i, label, t, *_coords(p, 3), variant, float(v)) for p, v in zip(pts, vals))
        return rows, notes

    for rows, notes in ctx.map(one, [(s, t) for s in sources for t in grid.times]):
        table.rows.extend(rows)
        table.notes.extend(notes)
    return [table]


def _samplers(ctx: Context, t: float, variant: str):
    cfg = ctx.require("sampler")
    centers = [tuple(cfg.center)]
    if cfg.sweep is not None:
        axis = "xyz".index(cfg.sweep.axis)
        centers = []
        for v in cfg.sweep.values():
            c = list(cfg.center)
            c[axis] = float(v)
            centers.append(tuple(c))
    base = [SamplerSpec(c, tuple(cfg.edges), cfg.sampling_time, t) for c in centers]
    if variant == "double_time":
        return [s.scaled(time_factor=2.0) for s in base]
    if variant == "double_volume":
        return [s.scaled(volume_factor=2.0) for s in base]
    return base


def sampled_values(ctx: Context):
    """``[(source_index, time, variant, samplers, c_samp)]`` for every combination."""
    cfg = ctx.require("sampler")
    sources = ctx.exhalations()
    if not sources:
        raise ValidationError("sampling needs a source of kind 'exhalation'")
    jobs = [(s, t, v) for s in sources for t in cfg.times for v in cfg.variants]

    def one(job):
        (i, src), t, variant = job
        fld = ctx.exhalation_field(src)
        samplers = _samplers(ctx, t, variant)
        values = SampledConcentration(fld, cfg.surrogate).evaluate(samplers)
        return i, t, variant, samplers, values

    return ctx.map(one, jobs)


def run_sample(ctx: Context) -> list[Table]:
    table = Table("sample", ["source", "time", "variant", "x_d", "y_d", "z_d", "volume", "sampling_time", "c_samp"])
    for i, t, variant, samplers, values in sampled_values(ctx):
        for smp, c in zip(samplers, values):
            table.rows.append((i, t, variant, *smp.center, smp.volume, smp.sampling_time, float(c)))
    return [table]


def detector_ratios(ctx: Context):
    det = ctx.require("detector")
    ratios = [(db, gamma_from_db(db)) for db in det.gamma_db]
    ratios += [(10.0 * math.log10(r), r) for r in det.gamma_ratio]
    if det.eta is not None:
        spec = DetectorSpec(det.eta, det.gamma, det.sigma2, q_p=det.q_p)
        r = spec.ratio()
        ratios.append((10.0 * math.log10(r), r))
    if not ratios:
        raise ValidationError("detector needs gamma_db, gamma_ratio or (eta, gamma, sigma2)")
    return det.q_p, ratios


def _clip_sampled(c, scale):
    """Zero out quadrature noise below the absolute tolerance; reject real negatives."""
    c = np.asarray(c, dtype=float)
    if np.any(c < -scale):
        raise SolverError(f"sampled concentration {c.min():.3g} is negative beyond quadrature tolerance")
    return np.clip(c, 0.0, None)


def run_pmd(ctx: Context) -> list[Table]:
    q_p, ratios = detector_ratios(ctx)
    table = Table("pmd", ["source", "time", "variant", "x_d", "y_d", "z_d", "gamma_db", "gamma_ratio",
                          "c_samp", "p_md"])
    for i, t, variant, samplers, values in sampled_values(ctx):
        src = dict(ctx.exhalations())[i]
        clipped = _clip_sampled(values, 10.0 * ctx.quadrature.abs_tol * src.strength_rate)
        for db, ratio in ratios:
            det = DetectorSpec(gamma_ratio=ratio, q_p=q_p)
            p = miss_detection_probability(det, clipped)
            for smp, c, pv in zip(samplers, clipped, np.atleast_1d(p)):
                table.rows.append((i, t, variant, *smp.center, db, ratio, float(c), float(pv)))
    table.notes.append("p_md = erfc(sqrt(gamma_ratio * c_samp^2 / q_p)) / 2")
    return [table]


# -- truncation study --------------------------------------------------------------

def truncation_errors(model: AxisModel, source_position: float, times, reference: int, max_count: int,
                      line_points: int = 1001, chunk: int = 4000):
    """``errors[t_index, N-1]`` = max over the line of |C_N - C_ref| / max|C_ref| for N = 1..max_count."""
    axis = model.axis
    nu = np.linspace(0.0, axis.length, line_points)
    ref_basis = model.basis(reference)
    lam_all = np.asarray(ref_basis.lam)
    b = axis.beta_lo
    out = np.empty((len(times), max_count))
    weights_all = ref_basis.point(source_position) / ref_basis.norm2
    n = ref_basis.n_pos
    extra = slice(n, ref_basis.size)
    # the first max_count modes (plus any negative/zero mode) share the reference normalisation
    head_basis = model.basis(max_count)
    head_table = head_basis.point(nu)
    head_cols, extra_cols = head_table[:, :max_count], head_table[:, head_basis.n_pos:]
    for ti, t in enumerate(times):
        decay = ref_basis.decay(t)
        coeff = weights_all * decay
        # modes beyond max_count, accumulated in chunks to bound memory
        tail = np.zeros_like(nu)
        # decay underflows to exactly zero for high modes; those terms add nothing
        live = np.flatnonzero(coeff[:n])
        stop = int(live[-1]) + 1 if live.size else 0
        for lo in range(max_count, stop, chunk):
            hi = min(lo + chunk, stop)
            lam = lam_all[lo:hi]
            arg = nu[:, None] * lam
            tail += (np.cos(arg) + (b / lam) * np.sin(arg)) @ coeff[lo:hi]
        head_vals = head_cols * coeff[:max_count]
        extra_vals = extra_cols @ coeff[extra]
        partial = np.cumsum(head_vals, axis=1) + extra_vals[:, None]
        ref = partial[:, -1] + tail
        peak = np.max(np.abs(ref))
        out[ti] = np.max(np.abs(partial - ref[:, None]), axis=0) / peak
    return out


def required_count(errors_row, threshold):
    """Smallest N with every larger scanned count also below ``threshold``."""
    above = np.flatnonzero(errors_row > threshold)
    if above.size == 0:
        return 1
    n = int(above[-1]) + 2
    return n if n <= errors_row.size else None


def run_truncation(ctx: Context, avg_over: str | None = None) -> list[Table]:
    cfg = ctx.require("truncation")
    avg_over = avg_over or cfg.avg_over
    sources = ctx.point_sources()
    if not sources:
        raise ValidationError("the truncation study needs a point source")
    src = sources[0][1]
    max_count = max(cfg.mode_counts)
    elapsed = [t - src.release_time for t in cfg.times]
    if min(elapsed) <= 0:
        raise ValidationError("truncation times must follow the release")
    per_axis = [truncation_errors(m, src.position[k], elapsed, cfg.reference, max_count, cfg.line_points)
                for k, m in enumerate(ctx.models)]
    errors = np.mean(per_axis, axis=0)  # average over the lines through the source
    table = Table("truncation", ["time", "modes", "relative_error"])
    summary = Table("truncation_required", ["time", "threshold", "required_modes"])
    if avg_over == "time":
        curve = errors.mean(axis=0)
        for n in cfg.mode_counts:
            table.rows.append(("mean", n, float(curve[n - 1])))
        summary.rows.append(("mean", cfg.threshold, required_count(curve, cfg.threshold)))
    else:
        for ti, t in enumerate(cfg.times):
            for n in cfg.mode_counts:
                table.rows.append((t, n, float(errors[ti, n - 1])))
            summary.rows.append((t, cfg.threshold, required_count(errors[ti], cfg.threshold)))
    note = (f"error = max over a {cfg.line_points}-point line of |C_N - C_ref| / max|C_ref|, "
            f"reference {cfg.reference} modes, averaged over {avg_over}"
            + (" and over the axis lines through the source" if ctx.room.dims > 1 else ""))
    table.notes.append(note)
    summary.notes.append(note)
    return [table, summary]


# -- validation suite -----------------------------------------------------------------

def fd_residuals(model: AxisModel, source_position: float, t: float, tail_tol=1e-12, h=1e-3, dt=1.0,
                 points=1001):
    """Finite-difference PDE and boundary residuals of the series, relative to the peak.

    Fourth-order central differences in time and space; fourth-order one-sided
    differences at the walls.
    """
    axis = model.axis
    basis = model.basis(model.modes_needed(max(t - 2 * dt, 1e-9), tail_tol))
    w = mode_weights(basis, source_position).vector()

    def field(nu, when):
        return np.sum(basis.point(nu) * (w * basis.decay(when)), axis=-1)

    L = axis.length
    nu = np.linspace(2 * h, L - 2 * h, points)
    c_t = (-field(nu, t + 2 * dt) + 8 * field(nu, t + dt) - 8 * field(nu, t - dt) + field(nu, t - 2 * dt)) / (12 * dt)
    c_xx = (-field(nu + 2 * h, t) + 16 * field(nu + h, t) - 30 * field(nu, t) + 16 * field(nu - h, t)
            - field(nu - 2 * h, t)) / (12 * h * h)
    peak = np.max(np.abs(field(np.linspace(0, L, points), t)))
    pde = np.max(np.abs(c_t - axis.diffusivity * c_xx)) / peak
    stencil = np.array([-25, 48, -36, 16, -3]) / (12 * h)
    lo = field(np.arange(5) * h, t)
    hi = field(L - np.arange(5) * h, t)
    bc_lo = abs(stencil @ lo - axis.beta_lo * lo[0]) / peak
    bc_hi = abs(-(stencil @ hi) - axis.beta_hi * hi[0]) / peak
    return pde, bc_lo, bc_hi, peak


def analytic_residuals(model: AxisModel, source_position: float, t: float, tail_tol=1e-12, points=1001):
    """Residuals from term-by-term analytic derivatives of the truncated series."""
    axis = model.axis
    basis = model.basis(model.modes_needed(t, tail_tol))
    w = mode_weights(basis, source_position).vector()
    d = w * basis.decay(t)
    nu = np.linspace(0, axis.length, points)
    c = basis.point(nu) @ d
    c_t = basis.point(nu) @ (-basis.rates * d)
    c_xx = basis.derivative(nu, 2) @ d
    ends = np.array([0.0, axis.length])
    c_end = basis.point(ends) @ d
    dc_end = basis.derivative(ends, 1) @ d
    peak = np.max(np.abs(c))
    return (np.max(np.abs(c_t - axis.diffusivity * c_xx)) / peak,
            abs(dc_end[0] - axis.beta_lo * c_end[0]) / peak,
            abs(dc_end[1] - axis.beta_hi * c_end[1]) / peak)


def fdm_comparison_1d(model: AxisModel, source_position: float, seed_time: float, end_time: float,
                      nodes: int, dt: float, tail_tol=1e-12):
    axis = model.axis
    x = grid_nodes(axis, nodes)

    def series(t):
        basis = model.basis(model.modes_needed(t, tail_tol))
        w = mode_weights(basis, source_position)
        return np.sum(basis.point(x) * (w.vector() * basis.decay(t)), axis=-1)

    seed = series(seed_time)
    target = series(end_time)
    evolved = fdm_evolve_1d(axis, seed, (seed_time, end_time), FdmGrid(nodes, dt))
    return float(np.max(np.abs(evolved - target)) / np.max(np.abs(target)))


def fdm_comparison_3d(models, position, probe, seed_time, end_time, nodes, dt, tail_tol=1e-12):
    factors_seed, factors_end, probe_end = [], [], 1.0
    for k, model in enumerate(models):
        x = grid_nodes(model.axis, nodes[k])
        for when, sink in ((seed_time, factors_seed), (end_time, factors_end)):
            basis = model.basis(model.modes_needed(when, tail_tol))
            w = mode_weights(basis, position[k]).vector() * basis.decay(when)
            sink.append(basis.point(x) @ w)
        basis = model.basis(model.modes_needed(end_time, tail_tol))
        w = mode_weights(basis, position[k]).vector() * basis.decay(end_time)
        probe_end *= float(basis.point(probe[k]) @ w)
    seed = np.einsum("i,j,k->ijk", *factors_seed)
    evolved = fdm_evolve_3d([m.axis for m in models], seed, (seed_time, end_time), nodes, dt)
    idx = [int(round(probe[k] / models[k].axis.length * (nodes[k] - 1))) for k in range(3)]
    for k in range(3):
        if abs(idx[k] * models[k].axis.length / (nodes[k] - 1) - probe[k]) > 1e-9:
            raise ValidationError("3-D probe must sit on a grid node")
    fdm_probe = float(evolved[tuple(idx)])
    return abs(fdm_probe - probe_end) / abs(probe_end), fdm_probe, probe_end


RESIDUAL_TOL = 1e-8
FDM_1D_TOL = 1e-3
FDM_3D_TOL = 5e-3


def run_validate(ctx: Context) -> list[Table]:
    cfg = ctx.config.oracle
    if cfg is None:
        raise ValidationError("config has no 'oracle' section")
    sources = ctx.point_sources()
    if not sources:
        raise ValidationError("validation needs a point source")
    src = sources[0][1]
    tail = ctx.config.solver.tail_tol
    table = Table("validate", ["check", "axis", "time", "value", "tolerance", "pass", "detail"])

    def record(check, axis, t, value, tol, detail=""):
        ok = value is not None and math.isfinite(value) and value < tol
        table.rows.append((check, axis, t, value, tol, ok, detail))

    for k, model in enumerate(ctx.models):
        name = "xyz"[k]
        for t in cfg.residual_times:
            elapsed = t - src.release_time
            try:
                pde, lo, hi, _ = fd_residuals(model, src.position[k], elapsed, tail)
                a_pde, a_lo, a_hi = analytic_residuals(model, src.position[k], elapsed, tail)
            except SolverError as exc:
                for check in ("pde_fd", "bc_lo_fd", "bc_hi_fd"):
                    record(check, name, t, None, RESIDUAL_TOL, str(exc))
                continue
            record("pde_fd", name, t, pde, RESIDUAL_TOL)
            record("bc_lo_fd", name, t, lo, RESIDUAL_TOL)
            record("bc_hi_fd", name, t, hi, RESIDUAL_TOL)
            record("pde_analytic", name, t, a_pde, RESIDUAL_TOL)
            record("bc_lo_analytic", name, t, a_lo, RESIDUAL_TOL)
            record("bc_hi_analytic", name, t, a_hi, RESIDUAL_TOL)
        try:
            err = fdm_comparison_1d(model, src.position[k], cfg.seed_time - src.release_time,
                                    cfg.end_time - src.release_time, cfg.nodes, cfg.dt, tail)
            record("fdm_1d", name, cfg.end_time, err, FDM_1D_TOL, f"nodes={cfg.nodes} dt={cfg.dt!r}")
        except SolverError as exc:
            record("fdm_1d", name, cfg.end_time, None, FDM_1D_TOL, str(exc))
    if ctx.room.dims == 3 and cfg.nodes_3d:
        probe = cfg.probe or list(src.position)
        try:
            err, fdm_val, series_val = fdm_comparison_3d(
                ctx.models, src.position, probe, cfg.seed_time - src.release_time,
                cfg.end_time - src.release_time, cfg.nodes_3d, cfg.dt_3d, tail)
            record("fdm_3d_probe", "xyz", cfg.end_time, err, FDM_3D_TOL,
                   f"nodes={'x'.join(map(str, cfg.nodes_3d))} dt={cfg.dt_3d!r} fdm={fdm_val!r} series={series_val!r}")
        except SolverError as exc:
            record("fdm_3d_probe", "xyz", cfg.end_time, None, FDM_3D_TOL, str(exc))
    table.notes.append("residuals and errors are relative to the peak concentration")
    return [table]


# -- output ----------------------------------------------------------------------------

def write_tables(tables, out_dir, header) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for table in tables:
        path = out / f"{table.name}.csv"
        path.write_text(table.to_csv(header))
        paths.append(path)
    return paths


COMMANDS = {
    "spectrum": run_spectrum,
    "point": run_point,
    "breath": run_breath,
    "sample": run_sample,
    "pmd": run_pmd,
    "truncation": run_truncation,
    "validate": run_validate,
}


def run_scenario(config: ScenarioConfig, command: str = "point", threads: int = 1, **options):
    """Run one command and return its tables (no files written)."""
    if command not in COMMANDS:
        raise ValidationError(f"unknown command {command!r}")
    ctx = Context(config, threads)
    return ctx, COMMANDS[command](ctx, **options)
