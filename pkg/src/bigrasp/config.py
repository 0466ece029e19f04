"""Run configuration for the batch synthesis pipeline.

A run is described by a single JSON document mirroring :class:`RunConfig`.
Sub-sections map one-to-one onto the tuning dataclasses of the core
modules (region selection, energy weights, optimizer schedule) so a config
file can pin any of them; omitted fields take the library defaults.
"""

from __future__ import annotations

import json
from pathlib import Path

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .optim import EnergyWeights, OptimConfig
from .regions import RegionParams


class ConfigError(ValueError):
    """Raised for unreadable or invalid run configuration files."""


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class ObjectSpec(_Strict):
    """One object to synthesize grasps for."""

    id: str = Field(min_length=1)
    mesh: str = Field(min_length=1)  # OBJ or STL path


class ScaleSweep(_Strict):
    """Uniform sweep of object scales (meters per model unit)."""

    min: float = 0.30
    max: float = 0.80
    count: int = 11

    @model_validator(mode="after")
    def _ordered(self) -> "ScaleSweep":
        if self.min <= 0.0 or self.max <= 0.0:
            raise ValueError("scale bounds must be positive")
        if self.max < self.min:
            raise ValueError("scale max must not be below min")
        if self.count < 1:
            raise ValueError("scale count must be at least 1")
        return self

    def values(self) -> list[float]:
        if self.count == 1:
            return [self.min]
        step = (self.max - self.min) / (self.count - 1)
        return [self.min + i * step for i in range(self.count)]


class RegionConfig(_Strict):
    k_anchors: int = 200
    k_neighbors: int = 256
    radius: float = 0.08
    n_contacts: int = 5
    m_directions: int = 1000
    k_retain: int = 40
    d_min: float = 0.10
    tau_concave: float = 0.002
    mu: float = 0.6

    def to_params(self) -> RegionParams:
        return RegionParams(**self.model_dump())


class WeightsConfig(_Strict):
    w_q_left: float = 1000.0
    w_q_right: float = 1000.0
    w_dis: float = 100.0
    w_region: float = 50.0
    w_col: float = 500.0
    beta: float = 0.1
    gamma: float = 0.2
    mu: float = 0.6
    a: float = 0.01

    def to_params(self) -> EnergyWeights:
        return EnergyWeights(**self.model_dump())


class OptimizerConfig(_Strict):
    iters: int = 200
    step_t: float = 1e-3
    step_r: float = 1e-2
    step_q: float = 1e-2
    anneal_iters: tuple[int, ...] = (100, 150)
    anneal_factor: float = 0.5
    max_backtracks: int = 8
    tol: float = 1e-6
    tol_window: int = 10

    def to_params(self) -> OptimConfig:
        return OptimConfig(**self.model_dump())


class RunConfig(_Strict):
    """Everything a synthesis run depends on, in one validated document.

    ``hands`` holds zero, one, or two hand description files: empty uses
    the built-in pair, a single file is mirrored into its opposite
    chirality, and two files are taken as left then right. Candidate
    counts are exact work quotas, not retry budgets: each (object, scale)
    cell runs ``grasps_per_object`` candidates and keeps the ones that
    survive screening.
    """

    objects: list[ObjectSpec]
    hands: list[str] = Field(default_factory=list, max_length=2)
    scales: ScaleSweep = Field(default_factory=ScaleSweep)
    regions: RegionConfig = Field(default_factory=RegionConfig)
    weights: WeightsConfig = Field(default_factory=WeightsConfig)
    optimizer: OptimizerConfig = Field(default_factory=OptimizerConfig)
    grasps_per_object: int = 20
    workers: int = 1
    seed: int = 0
    output: str = "dataset.jsonl"
    surface_samples: int = 1024
    hull_offset: float = 0.02
    table_height: float | None = 0.0

    @model_validator(mode="after")
    def _counts(self) -> "RunConfig":
        if self.grasps_per_object < 1:
            raise ValueError("grasps_per_object must be at least 1")
        if self.workers < 1:
            raise ValueError("workers must be at least 1")
        if self.surface_samples < 1:
            raise ValueError("surface_samples must be at least 1")
        if self.hull_offset < 0.0:
            raise ValueError("hull_offset must be non-negative")
        seen = set()
        for spec in self.objects:
            if spec.id in seen:
                raise ValueError(f"duplicate object id: {spec.id}")
            seen.add(spec.id)
        return self


def load_run_config(path: str | Path) -> RunConfig:
    """Parse and validate a run config file; all failures raise ConfigError."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    try:
        return RunConfig.model_validate(payload)
    except ValidationError as exc:
        raise ConfigError(f"config {path} is invalid: {exc}") from exc
