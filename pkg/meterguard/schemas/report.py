# Schemas for metrics, experiment specs and report rows
from enum import Enum
from typing import Optional

from pydantic import BaseModel, ConfigDict, Field, computed_field, model_validator

from .attack import AttackConfig, AttackKind


class Setting(str, Enum):
    WHITE = "white"
    BLACK = "black"


class ClassifierMetrics(BaseModel):
    """Confusion counts with Theft as the positive class."""

    model_config = ConfigDict(frozen=True)

    model_id: str
    tp: int = Field(ge=0)
    fp: int = Field(ge=0)
    tn: int = Field(ge=0)
    fn: int = Field(ge=0)
    seed: Optional[int] = None

    @computed_field
    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    @computed_field
    @property
    def accuracy(self) -> float:
        return (self.tp + self.tn) / self.total if self.total else 0.0

    @computed_field
    @property
    def fpr(self) -> float:
        negatives = self.fp + self.tn
        return self.fp / negatives if negatives else 0.0

    @computed_field
    @property
    def recall(self) -> float:
        positives = self.tp + self.fn
        return self.tp / positives if positives else 0.0


class ExperimentSpec(BaseModel):
    """A grid of attack settings run against one defender."""

    model_config = ConfigDict(frozen=True)

    name: str
    defender_id: str
    surrogate_id: str
    grid: list[AttackConfig] = Field(default_factory=list)
    vectors_per_cell: int = Field(1000, ge=1)
    normal_mean_l1: float = Field(gt=0)
    seed: int = 0

    @property
    def setting(self) -> Setting:
        return Setting.WHITE if self.surrogate_id == self.defender_id else Setting.BLACK


class AttackReportRow(BaseModel):
    """One sweep cell."""

    model_config = ConfigDict(frozen=True)

    setting: Setting
    defender: str
    attack: AttackKind
    epsilon: Optional[float] = None
    step: Optional[int] = None
    size: Optional[float] = None
    sigma: Optional[float] = None
    max_iter: Optional[int] = None
    alpha: Optional[float] = None
    u: Optional[float] = None
    recall: float = Field(ge=0, le=1)
    bypass: float = Field(ge=0, le=1)
    avg_l1: float = Field(ge=0)
    n: int = Field(ge=1)
    seed: int
    surrogate: str
    l1_fraction: float = Field(ge=0)
    mean_iterations: Optional[float] = None
    aborted: int = 0

    @model_validator(mode="after")
    def _complement(self) -> "AttackReportRow":
        if self.bypass != 1.0 - self.recall:
            raise ValueError(f"bypass {self.bypass} is not 1 - recall ({self.recall})")
        return self

    @classmethod
    def from_cell(
        cls,
        spec: ExperimentSpec,
        config: AttackConfig,
        recall: float,
        avg_l1: float,
        n: int,
        mean_iterations: Optional[float] = None,
        aborted: int = 0,
    ) -> "AttackReportRow":
        return cls(
            setting=spec.setting,
            defender=spec.defender_id,
            surrogate=spec.surrogate_id,
            attack=config.kind,
            recall=recall,
            bypass=1.0 - recall,
            avg_l1=avg_l1,
            l1_fraction=avg_l1 / spec.normal_mean_l1,
            n=n,
            seed=config.seed,
            mean_iterations=mean_iterations,
            aborted=aborted,
            **config.params(),
        )

    def grid_key(self) -> tuple:
        """Identifies the cell independently of which defender was attacked."""
        return (
            self.setting.value, self.attack.value, self.epsilon, self.step, self.size,
            self.sigma, self.max_iter, self.alpha, self.u, self.n, self.seed,
        )


REPORT_COLUMNS: tuple[str, ...] = tuple(AttackReportRow.model_fields)


class DefenseComparisonRow(BaseModel):
    model_config = ConfigDict(frozen=True)

    attack: AttackKind
    epsilon: Optional[float] = None
    step: Optional[int] = None
    size: Optional[float] = None
    plain_defender: str
    distilled_defender: str
    plain_bypass: float
    distilled_bypass: float
    delta_bypass: float
    plain_avg_l1: float
    distilled_avg_l1: float
    delta_avg_l1: float


class ComparisonSummary(BaseModel):
    model_config = ConfigDict(frozen=True)

    cells: int
    reduced: int
    unchanged: int
    increased: int

    @computed_field
    @property
    def not_worse_fraction(self) -> float:
        return (self.reduced + self.unchanged) / self.cells if self.cells else 1.0
