from .attack import AttackConfig, AttackKind
from .report import (
    REPORT_COLUMNS,
    AttackReportRow,
    ClassifierMetrics,
    ComparisonSummary,
    DefenseComparisonRow,
    ExperimentSpec,
    Setting,
)
from .run import STAGES, RunConfig
from .training import DistillConfig, TrainConfig

__all__ = [
    "AttackConfig",
    "AttackKind",
    "REPORT_COLUMNS",
    "AttackReportRow",
    "ClassifierMetrics",
    "ComparisonSummary",
    "DefenseComparisonRow",
    "ExperimentSpec",
    "Setting",
    "STAGES",
    "RunConfig",
    "DistillConfig",
    "TrainConfig",
]
