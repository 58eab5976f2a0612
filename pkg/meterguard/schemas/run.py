# Schemas for pipeline runs
from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from ..utils.common import content_hash, log_grid, parse_float_list

STAGES = ("prepare-data", "train", "distill", "attack", "evaluate", "report")

# Fields that determine each stage's outputs; later stages inherit earlier ones
_DATA_FIELDS = (
    "data_in", "raw", "rows_per_side", "polluted_fraction", "test_fraction",
    "holdout_normals", "scenario_mix", "seed",
)
_TRAIN_FIELDS = _DATA_FIELDS + ("width_scale", "epochs", "learning_rate", "batch_size")
_DISTILL_FIELDS = _TRAIN_FIELDS + ("temperature",)
_ATTACK_FIELDS = _DISTILL_FIELDS + (
    "vectors_per_cell", "sigma", "max_iter", "eps_grid", "alpha_grid", "u_grid",
    "step_max", "size_grid", "max_l1_fraction",
)
STAGE_FIELDS: dict[str, tuple[str, ...]] = {
    "prepare-data": _DATA_FIELDS,
    "train": _TRAIN_FIELDS,
    "distill": _DISTILL_FIELDS,
    "attack": _ATTACK_FIELDS,
    "evaluate": _ATTACK_FIELDS,
    "report": _ATTACK_FIELDS,
}

_GRID_FIELDS = ("eps_grid", "alpha_grid", "u_grid", "size_grid")


class RunConfig(BaseModel):
    """Everything one pipeline run depends on, with desk-scale defaults."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    # Paths
    data_in: Optional[str] = None
    raw: bool = False
    workdir: str = "./workdir"
    reports_out: str = "./reports"

    # Dataset sizing
    rows_per_side: int = Field(20000, ge=2)
    polluted_fraction: float = Field(0.5, ge=0, le=1)
    test_fraction: float = Field(0.2, gt=0, lt=1)
    holdout_normals: int = Field(2000, ge=1)
    scenario_mix: Optional[str] = None

    # Models
    width_scale: float = Field(0.25, gt=0)
    epochs: int = Field(30, ge=0)
    learning_rate: float = Field(1e-3, gt=0)
    batch_size: int = Field(128, ge=1)
    temperature: float = Field(100.0, ge=1)

    # Attacks
    vectors_per_cell: int = Field(1000, ge=1)
    sigma: float = Field(1e-4, ge=0)
    max_iter: int = Field(100, ge=1)
    eps_grid: list[float] = Field(default_factory=lambda: log_grid(-2.0, 0.5, 15))
    alpha_grid: list[float] = Field(default_factory=lambda: [round(0.05 * k, 2) for k in range(1, 20)])
    u_grid: list[float] = Field(default_factory=lambda: [float(v) for v in np.linspace(0.05, 2.0, 15)])
    step_max: int = Field(30, ge=1)
    size_grid: list[float] = Field(default_factory=lambda: log_grid(-3.0, 0.0, 16))
    max_l1_fraction: float = Field(0.1, gt=0)

    seed: int = 0
    jobs: int = Field(1, ge=1)
    force: bool = False
    stages: list[str] = Field(default_factory=lambda: list(STAGES))

    @field_validator(*_GRID_FIELDS, mode="before")
    @classmethod
    def _parse_grid(cls, value):
        if isinstance(value, str):
            return parse_float_list(value)
        return value

    @field_validator(*_GRID_FIELDS)
    @classmethod
    def _positive_grid(cls, value: list[float]) -> list[float]:
        if not value:
            raise ValueError("grid must not be empty")
        if any(v <= 0 for v in value):
            raise ValueError(f"grid values must be positive: {value}")
        return value

    @field_validator("stages", mode="before")
    @classmethod
    def _parse_stages(cls, value):
        if isinstance(value, str):
            return [part.strip() for part in value.split(",") if part.strip()]
        return value

    @model_validator(mode="after")
    def _check(self) -> "RunConfig":
        unknown = [s for s in self.stages if s not in STAGES]
        if unknown:
            raise ValueError(f"unknown stages: {unknown}")
        if self.raw and not self.data_in:
            raise ValueError("raw input requires data_in")
        return self

    def config_hash(self, stage: str) -> str:
        """12-hex-digit SHA-256 prefix over the fields that shape a stage's outputs."""
        fields = STAGE_FIELDS[stage]
        return content_hash({name: getattr(self, name) for name in fields}, length=12)
