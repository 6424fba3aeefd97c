"""Scenario configuration: YAML text validated by pydantic models.

Unknown keys are rejected everywhere so a misspelt deposition velocity cannot
silently fall back to a default.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Annotated, Literal, Union

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError as PydanticError, model_validator

from .eigenspectrum import AxisSpec
from .errors import ValidationError
from .greens import Room


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class AxisConfig(_Strict):
    length: float = Field(gt=0)
    diffusivity: float = Field(gt=0)
    deposition_lo: float = Field(ge=0)
    deposition_hi: float = Field(ge=0)

    def spec(self) -> AxisSpec:
        return AxisSpec(self.length, self.diffusivity, self.deposition_lo, self.deposition_hi)


class RoomConfig(_Strict):
    x: AxisConfig
    y: AxisConfig | None = None
    z: AxisConfig | None = None

    @model_validator(mode="after")
    def _axes_in_order(self):
        if self.z is not None and self.y is None:
            raise ValueError("z given without y")
        return self

    def build(self) -> Room:
        return Room(self.x.spec(), self.y.spec() if self.y else None, self.z.spec() if self.z else None)


class PointSourceConfig(_Strict):
    kind: Literal["point"]
    position: list[float] = Field(min_length=1, max_length=3)
    strength: float = Field(default=1.0, gt=0)
    release_time: float = 0.0


class ExhalationConfig(_Strict):
    kind: Literal["exhalation"]
    plane_x: float
    center: list[float] = Field(min_length=2, max_length=2)
    radius: float = Field(ge=0)
    start: float = 0.0
    end: float
    strength_rate: float = Field(default=1.0, gt=0)


SourceConfig = Annotated[Union[PointSourceConfig, ExhalationConfig], Field(discriminator="kind")]


class LineConfig(_Strict):
    """Evenly spaced points along ``axis``; the other coordinates come from ``through``."""

    axis: Literal["x", "y", "z"]
    start: float
    stop: float
    num: int = Field(ge=1)
    through: list[float] = Field(min_length=1, max_length=3)


class GridConfig(_Strict):
    lines: list[LineConfig] = []
    points: list[list[float]] = []
    times: list[float] = Field(min_length=1)

    @model_validator(mode="after")
    def _non_empty(self):
        if not self.lines and not self.points:
            raise ValueError("evaluation grid is empty: give lines or points")
        return self

    def blocks(self, dims: int):
        """``(label, points)`` blocks in file order."""
        out = []
        for k, line in enumerate(self.lines):
            if len(line.through) != dims:
                raise ValidationError(f"grid.lines[{k}].through needs {dims} coordinates")
            axis = "xyz".index(line.axis)
            if axis >= dims:
                raise ValidationError(f"grid.lines[{k}] runs along {line.axis} in a {dims}-D room")
            pts = np.tile(np.asarray(line.through, dtype=float), (line.num, 1))
            pts[:, axis] = np.linspace(line.start, line.stop, line.num)
            out.append((f"line_{line.axis}", pts))
        if self.points:
            pts = np.asarray(self.points, dtype=float)
            if pts.ndim != 2 or pts.shape[1] != dims:
                raise ValidationError(f"grid.points need {dims} coordinates each")
            out.append(("points", pts))
        return out


class SweepConfig(_Strict):
    axis: Literal["x", "y", "z"]
    start: float
    stop: float
    num: int = Field(ge=1)

    def values(self):
        return np.linspace(self.start, self.stop, self.num)


class SamplerConfig(_Strict):
    center: list[float] = Field(min_length=3, max_length=3)
    edges: list[float] = Field(min_length=3, max_length=3)
    sampling_time: float = Field(ge=0)
    times: list[float] = Field(min_length=1)
    sweep: SweepConfig | None = None
    surrogate: Literal["lower", "equal", "upper"] = "equal"
    variants: list[Literal["base", "double_time", "double_volume"]] = ["base"]


class DetectorConfig(_Strict):
    q_p: float = Field(gt=0)
    gamma_db: list[float] = []
    gamma_ratio: list[float] = []
    eta: float | None = None
    gamma: float | None = None
    sigma2: float | None = None


class QuadratureSettings(_Strict):
    abs_tol: float = Field(default=1e-10, gt=0)
    rel_tol: float = Field(default=1e-8, ge=0)
    gauss_nodes: int = Field(default=32, ge=2)
    max_intervals: int = Field(default=2000, ge=10)


class SolverConfig(_Strict):
    modes: int | None = Field(default=None, ge=1)
    tol: float = Field(default=1e-12, gt=0, le=1e-6)
    degenerate_tol: float = Field(default=1e-12, ge=0)
    tail_tol: float = Field(default=1e-12, gt=0)
    max_modes: int = Field(default=100_000, ge=1)
    negative_mode: Literal["decaying", "exact"] = "decaying"
    quadrature: QuadratureSettings = QuadratureSettings()


class TruncationConfig(_Strict):
    mode_counts: list[int] = Field(min_length=1)
    reference: int = 100_000
    times: list[float] = Field(min_length=1)
    line_points: int = Field(default=1001, ge=2)
    threshold: float = Field(default=1e-4, gt=0)
    avg_over: Literal["time", "space"] = "space"

    @model_validator(mode="after")
    def _reference_largest(self):
        if self.reference <= max(self.mode_counts):
            raise ValueError("reference must exceed every entry of mode_counts")
        return self


class OracleConfig(_Strict):
    seed_time: float = 60.0
    end_time: float = 600.0
    nodes: int = Field(default=2001, ge=3)
    dt: float = Field(default=0.05, gt=0)
    nodes_3d: list[int] | None = None
    dt_3d: float = Field(default=5.0, gt=0)
    probe: list[float] | None = None
    residual_times: list[float] = [300.0, 600.0, 1200.0, 1800.0]


class OutputConfig(_Strict):
    dir: str = "out"


class ScenarioConfig(_Strict):
    name: str
    room: RoomConfig
    sources: list[SourceConfig] = Field(min_length=1)
    grid: GridConfig | None = None
    sampler: SamplerConfig | None = None
    detector: DetectorConfig | None = None
    solver: SolverConfig = SolverConfig()
    truncation: TruncationConfig | None = None
    oracle: OracleConfig | None = None
    output: OutputConfig = OutputConfig()

    def canonical(self) -> dict:
        return self.model_dump(mode="json")

    def sha256(self) -> str:
        text = json.dumps(self.canonical(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()

    def with_solver(self, **changes) -> "ScenarioConfig":
        solver = self.solver.model_copy(update={k: v for k, v in changes.items() if v is not None})
        return self.model_copy(update={"solver": SolverConfig.model_validate(solver.model_dump())})


def _format_errors(exc: PydanticError) -> str:
    lines = []
    for err in exc.errors():
        path = ".".join(str(p) for p in err["loc"]) or "<root>"
        lines.append(f"{path}: {err['msg']}")
    return "; ".join(lines)


def parse_config(data: dict) -> ScenarioConfig:
    try:
        return ScenarioConfig.model_validate(data)
    except PydanticError as exc:
        raise ValidationError(f"invalid config: {_format_errors(exc)}") from None


def load_config(path) -> ScenarioConfig:
    path = Path(path)
    try:
        data = yaml.safe_load(path.read_text())
    except (OSError, yaml.YAMLError) as exc:
        raise ValidationError(f"cannot read config {path}: {exc}") from None
    if not isinstance(data, dict):
        raise ValidationError(f"config {path} must be a mapping at the top level")
    return parse_config(data)


def dump_config(config: ScenarioConfig) -> str:
    return yaml.safe_dump(config.canonical(), sort_keys=False)
