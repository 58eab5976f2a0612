"""
Utils package for the meterguard workbench.

Common utilities for error handling, seeding, hashing and file output.
"""
from .errors import (
    WorkbenchError,
    MissingArtifactError,
    ValidationError,
    ShapeMismatchError,
    InvalidScenarioError,
    NonFiniteError,
    TrainingDivergedError,
    VanishingGradientError,
    DataFormatError,
    InsufficientDataError,
    GridMismatchError,
    AccessViolationError,
    handle_stage_error,
    log_and_return_error,
)
from .common import (
    READINGS_PER_DAY,
    derive_rng,
    round_half_up,
    content_hash,
    file_hash,
    atomic_write,
    write_json,
    log_grid,
    parse_float_list,
)

__all__ = [
    "WorkbenchError",
    "MissingArtifactError",
    "ValidationError",
    "ShapeMismatchError",
    "InvalidScenarioError",
    "NonFiniteError",
    "TrainingDivergedError",
    "VanishingGradientError",
    "DataFormatError",
    "InsufficientDataError",
    "GridMismatchError",
    "AccessViolationError",
    "handle_stage_error",
    "log_and_return_error",
    "READINGS_PER_DAY",
    "derive_rng",
    "round_half_up",
    "content_hash",
    "file_hash",
    "atomic_write",
    "write_json",
    "log_grid",
    "parse_float_list",
]
