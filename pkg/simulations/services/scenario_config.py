"""
Scenario documents: YAML text validated into a ScenarioConfig.

Every problem is reported at once as ``dotted.path: message`` strings. Field checks come
from the pydantic models; cross-field checks (times inside the run, wave vectors inside
the conjugate window, features inside the box) run on the validated models.
"""
from __future__ import annotations

import copy
import logging
import math
from pathlib import Path
from typing import Annotated, Any, Dict, List, Literal, Optional, Sequence, Tuple, Union

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from simulations.domain import GsCollisionSpec, HeCollisionSpec, HeKernelCollisionSpec
from simulations.exceptions import ConfigurationError, ScenarioConfigError

logger = logging.getLogger(__name__)

LATTICE_TOLERANCE = 1e-6

Coefficient = Union[float, Tuple[float, float]]


class StrictModel(BaseModel):
    model_config = ConfigDict(extra="forbid")


class GridConfig(StrictModel):
    x_min: float = Field(..., description="Left wall position (nm)")
    x_max: float = Field(..., description="Right wall position (nm)")
    n_points: int = Field(..., ge=2, description="Number of nodes, walls included")

    @model_validator(mode="after")
    def check_span(self):
        if self.x_max <= self.x_min:
            raise ValueError("x_max must exceed x_min")
        return self


class MassConfig(StrictModel):
    effective_mass: float = Field(..., gt=0, description="m*/m0")


class WavePacketConfig(StrictModel):
    x0: float = Field(..., description="Centre (nm)")
    k0: float = Field(..., description="Central wave vector (1/nm)")
    a0: float = Field(..., gt=0, description="Width (nm)")


class PacketsConfig(StrictModel):
    wave_packets: List[WavePacketConfig] = Field(..., min_length=1)
    coefficients: Optional[List[Coefficient]] = Field(
        default=None, description="Superposition coefficients; a number or [re, im]. Defaults to all ones."
    )
    electron_count: int = Field(default=1, ge=1, description="Electrons described by the ensemble")

    @model_validator(mode="after")
    def check_coefficients(self):
        if self.coefficients is not None and len(self.coefficients) != len(self.wave_packets):
            raise ValueError(
                f"{len(self.coefficients)} coefficients for {len(self.wave_packets)} wave packets"
            )
        return self

    def complex_coefficients(self) -> List[complex]:
        if self.coefficients is None:
            return [1.0 + 0.0j] * len(self.wave_packets)
        return [complex(*c) if isinstance(c, tuple) else complex(c) for c in self.coefficients]


class DoubleBarrierConfig(StrictModel):
    kind: Literal["double_barrier"]
    center: float = Field(..., description="Centre of the well (nm)")
    barrier_width: float = Field(..., gt=0, description="Width of each barrier (nm)")
    height: float = Field(..., description="Barrier height (eV)")
    well_width: float = Field(..., ge=0, description="Inner-edge to inner-edge separation (nm)")


class FreePotentialConfig(StrictModel):
    kind: Literal["free"]


PotentialConfig = Annotated[Union[DoubleBarrierConfig, FreePotentialConfig], Field(discriminator="kind")]


class EvolutionConfig(StrictModel):
    dt: float = Field(..., gt=0, description="Transport step (fs)")
    t_end: float = Field(..., ge=0, description="End of the run (fs)")
    snapshot_times: List[float] = Field(default_factory=list, description="Requested snapshot times (fs)")
    substeps: int = Field(default=1, ge=1, description="Internal propagator substeps per dt")
    laplacian: Literal["three_point", "compact"] = "three_point"


class NoCollisionConfig(StrictModel):
    mode: Literal["none"]


class HeCollisionConfig(StrictModel):
    mode: Literal["he"]
    t_s: float = Field(..., ge=0, description="Scattering time (fs)")
    k0: Optional[float] = Field(default=None, description="Initial wave vector; defaults to the first packet's k0")
    k_final: Optional[float] = Field(default=None, description="Final wave vector; defaults to -k0")
    a0: Optional[float] = Field(default=None, gt=0, description="Reference width; defaults to the first packet's a0")
    weight_mode: Literal["auto_max_safe", "explicit", "calibrated"] = "auto_max_safe"
    safety: float = Field(default=0.9, gt=0, le=1)
    weight: Optional[float] = Field(default=None, gt=0)
    x0_ref: Optional[float] = None
    safety_floor: float = Field(default=1e-14, gt=0)
    target_negative_norm: float = Field(default=-0.025, le=0)
    calibration_tolerance: float = Field(default=1e-4, gt=0)
    calibration_time: Optional[float] = Field(default=None, ge=0)

    @model_validator(mode="after")
    def check_weight(self):
        if self.weight_mode == "explicit" and self.weight is None:
            raise ValueError("weight is required when weight_mode is explicit")
        return self

    def to_spec(self) -> HeCollisionSpec:
        return HeCollisionSpec(
            t_s=self.t_s,
            k0=self.k0,
            k_final=self.k_final,
            weight_mode=self.weight_mode,
            safety=self.safety,
            weight=self.weight,
            x0_ref=self.x0_ref,
            safety_floor=self.safety_floor,
        )


class HeKernelCollisionConfig(StrictModel):
    mode: Literal["he_kernel"]
    t_s: float = Field(..., ge=0)
    k0: Optional[float] = None
    k_final: Optional[float] = None
    strength: Optional[float] = Field(default=None, gt=0, description="Kernel strength c (1/nm)")
    safety: float = Field(default=0.9, gt=0, le=1)
    safety_floor: float = Field(default=1e-14, gt=0)
    rank_tolerance: float = Field(default=1e-8, gt=0, lt=1)
    max_terms: int = Field(default=48, ge=1)

    def to_spec(self) -> HeKernelCollisionSpec:
        return HeKernelCollisionSpec(
            t_s=self.t_s,
            k0=self.k0,
            k_final=self.k_final,
            strength=self.strength,
            safety=self.safety,
            safety_floor=self.safety_floor,
            rank_tolerance=self.rank_tolerance,
            max_terms=self.max_terms,
        )


class GsCollisionConfig(StrictModel):
    mode: Literal["gs"]
    t_s: float = Field(..., ge=0)
    k0: Optional[float] = None
    k_final: Optional[float] = None
    a0: Optional[float] = Field(default=None, gt=0)
    source_index: int = Field(default=0, ge=0)
    occupation: Optional[int] = Field(default=None, ge=0)
    schedule: Literal["instantaneous", "continuous"] = "instantaneous"
    rate: float = Field(default=0.0, ge=0, description="Transfer rate for the continuous schedule (1/fs)")
    x0_ref: Optional[float] = None

    @model_validator(mode="after")
    def check_rate(self):
        if self.schedule == "continuous" and self.rate <= 0:
            raise ValueError("a positive rate is required when schedule is continuous")
        return self

    def to_spec(self) -> GsCollisionSpec:
        return GsCollisionSpec(
            t_s=self.t_s,
            k0=self.k0,
            k_final=self.k_final,
            source_index=self.source_index,
            occupation=self.occupation,
            schedule=self.schedule,
            rate=self.rate,
            x0_ref=self.x0_ref,
        )


CollisionConfig = Annotated[
    Union[NoCollisionConfig, HeCollisionConfig, HeKernelCollisionConfig, GsCollisionConfig],
    Field(discriminator="mode"),
]


class OutputConfig(StrictModel):
    directory: Optional[str] = Field(default=None, description="Defaults to runs/<name>")
    wigner_format: Literal["text", "binary"] = "text"
    wigner_stride: int = Field(default=4, ge=1)
    negativity_tol: float = Field(default=0.0, ge=0)
    leak_margin: float = Field(default=5.0, gt=0)
    leak_threshold: float = Field(default=1e-6, gt=0, description="Boundary leak above this is flagged in the manifest")
    cluster_gap: float = Field(default=1.0, gt=0, description="Violations closer than this share a cluster (nm)")


class ScenarioConfig(StrictModel):
    name: str = Field(default="scenario", min_length=1)
    grid: GridConfig
    mass: MassConfig
    packets: PacketsConfig
    potential: PotentialConfig
    evolution: EvolutionConfig
    collision: CollisionConfig = Field(default_factory=lambda: NoCollisionConfig(mode="none"))
    output: OutputConfig = Field(default_factory=OutputConfig)

    @model_validator(mode="after")
    def resolve_collision_defaults(self):
        collision = self.collision
        if collision.mode == "none":
            return self
        reference = self.packets.wave_packets[0]
        if collision.k0 is None:
            collision.k0 = reference.k0
        if collision.k_final is None:
            collision.k_final = -collision.k0
        if hasattr(collision, "a0") and collision.a0 is None:
            collision.a0 = reference.a0
        return self

    @property
    def dx(self) -> float:
        return (self.grid.x_max - self.grid.x_min) / (self.grid.n_points - 1)

    def resolved(self) -> Dict[str, Any]:
        return self.model_dump(mode="json")


def _format_location(location: Sequence[Any]) -> str:
    return ".".join(str(part) for part in location) or "document"


def _format_validation_error(exc: ValidationError) -> List[str]:
    messages = []
    for error in exc.errors():
        # drop the discriminator tag pydantic inserts into union locations
        location = [part for part in error["loc"] if part not in ("double_barrier", "free", "none", "he", "he_kernel", "gs")]
        message = error["msg"].removeprefix("Value error, ")
        messages.append(f"{_format_location(location)}: {message}")
    return messages


def _on_lattice(value: float, dt: float) -> bool:
    ratio = value / dt
    return abs(ratio - round(ratio)) <= LATTICE_TOLERANCE


def _cross_field_errors(config: ScenarioConfig) -> List[str]:
    errors: List[str] = []
    grid = config.grid
    evolution = config.evolution
    dx = config.dx
    dk = 2.0 * math.pi / (grid.n_points * dx)
    k_min = -(grid.n_points // 2) * dk
    k_max = k_min + (grid.n_points - 1) * dk

    if not _on_lattice(evolution.t_end, evolution.dt):
        errors.append("evolution.t_end: must be a whole number of steps of evolution.dt")
    for i, time in enumerate(evolution.snapshot_times):
        if time < 0 or time > evolution.t_end:
            errors.append(f"evolution.snapshot_times.{i}: {time} fs lies outside [0, t_end={evolution.t_end}] fs")

    for i, packet in enumerate(config.packets.wave_packets):
        if not grid.x_min < packet.x0 < grid.x_max:
            errors.append(f"packets.wave_packets.{i}.x0: {packet.x0} nm lies outside the box")
        if not k_min <= packet.k0 <= k_max:
            errors.append(
                f"packets.wave_packets.{i}.k0: {packet.k0} 1/nm lies outside the momentum window "
                f"[{k_min:.4g}, {k_max:.4g}]"
            )

    potential = config.potential
    if potential.kind == "double_barrier":
        outer = potential.well_width / 2.0 + potential.barrier_width
        if potential.center - outer < grid.x_min or potential.center + outer > grid.x_max:
            errors.append("potential: double barrier does not fit inside the box")

    collision = config.collision
    if collision.mode != "none":
        if collision.t_s > evolution.t_end:
            errors.append(f"collision.t_s: {collision.t_s} fs is after evolution.t_end ({evolution.t_end} fs)")
        elif not _on_lattice(collision.t_s, evolution.dt):
            errors.append("collision.t_s: must be a whole number of steps of evolution.dt")
        for key in ("k0", "k_final"):
            value = getattr(collision, key)
            if not k_min <= value <= k_max:
                errors.append(f"collision.{key}: {value} 1/nm lies outside the momentum window")
    if collision.mode == "he" and collision.calibration_time is not None:
        if collision.calibration_time > evolution.t_end:
            errors.append("collision.calibration_time: must not exceed evolution.t_end")
        elif collision.calibration_time < collision.t_s:
            errors.append("collision.calibration_time: must not precede collision.t_s")
    if collision.mode == "gs" and collision.source_index != 0:
        errors.append("collision.source_index: the initial ensemble has a single member (index 0)")
    return errors


def _set_path(document: Dict[str, Any], path: str, value: Any):
    parts = path.split(".")
    node: Any = document
    for depth, part in enumerate(parts):
        last = depth == len(parts) - 1
        if isinstance(node, list):
            if not part.isdigit() or int(part) >= len(node):
                raise ScenarioConfigError([f"{path}: no list element {part!r}"])
            if last:
                node[int(part)] = value
            else:
                node = node[int(part)]
        elif isinstance(node, dict):
            if last:
                node[part] = value
            else:
                node = node.setdefault(part, {})
        else:
            raise ScenarioConfigError([f"{path}: cannot descend into a scalar at {part!r}"])


def apply_overrides(document: Dict[str, Any], overrides: Sequence[str]) -> Dict[str, Any]:
    """Apply ``key.path=value`` edits; values are parsed as YAML scalars."""
    for override in overrides:
        key, separator, raw_value = override.partition("=")
        if not separator or not key.strip():
            raise ScenarioConfigError([f"override {override!r}: expected key.path=value"])
        try:
            value = yaml.safe_load(raw_value)
        except yaml.YAMLError as exc:
            raise ScenarioConfigError([f"{key}: unreadable override value ({exc})"]) from exc
        _set_path(document, key.strip(), value)
    return document


def parse_document(raw_text: str) -> Dict[str, Any]:
    try:
        document = yaml.safe_load(raw_text)
    except yaml.YAMLError as exc:
        raise ScenarioConfigError([f"document: not valid YAML ({exc})"]) from exc
    if document is None:
        return {}
    if not isinstance(document, dict):
        raise ScenarioConfigError(["document: the top level must be a mapping"])
    return document


def validate_document(document: Dict[str, Any]) -> ScenarioConfig:
    try:
        config = ScenarioConfig.model_validate(document)
    except ValidationError as exc:
        raise ScenarioConfigError(_format_validation_error(exc)) from None
    errors = _cross_field_errors(config)
    if errors:
        raise ScenarioConfigError(errors)
    return config


def validate_config(
    raw_text: str,
    overrides: Sequence[str] = (),
    snapshot_times: Optional[Sequence[float]] = None,
    default_name: Optional[str] = None,
) -> ScenarioConfig:
    return validate_mapping(parse_document(raw_text), overrides, snapshot_times, default_name)


def validate_mapping(
    document: Dict[str, Any],
    overrides: Sequence[str] = (),
    snapshot_times: Optional[Sequence[float]] = None,
    default_name: Optional[str] = None,
) -> ScenarioConfig:
    """Validate an already-parsed scenario; ``document`` is copied, never modified."""
    document = copy.deepcopy(document)
    if default_name and "name" not in document:
        document["name"] = default_name
    apply_overrides(document, overrides)
    if snapshot_times is not None:
        evolution = document.setdefault("evolution", {})
        if isinstance(evolution, dict):
            evolution["snapshot_times"] = list(snapshot_times)
    return validate_document(document)


def parse_snapshot_list(raw: str) -> List[float]:
    try:
        return [float(part) for part in raw.split(",") if part.strip()]
    except ValueError as exc:
        raise ScenarioConfigError([f"snapshots: expected comma-separated times, got {raw!r}"]) from exc


def load_scenario(
    path: Union[str, Path],
    overrides: Sequence[str] = (),
    snapshot_times: Optional[Sequence[float]] = None,
) -> ScenarioConfig:
    path = Path(path)
    try:
        raw_text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigurationError(f"cannot read scenario file {path}: {exc}") from exc
    config = validate_config(raw_text, overrides, snapshot_times, default_name=path.stem)
    logger.info("Loaded scenario %r from %s", config.name, path)
    return config
