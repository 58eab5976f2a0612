"""
Common error handling utilities.

Provides the exception hierarchy shared by every stage of the workbench and
the helpers the CLI uses to turn failures into exit codes.
"""
import logging
from typing import Any, Optional

logger = logging.getLogger(__name__)


class WorkbenchError(Exception):
    """Base exception for workbench errors."""

    def __init__(self, message: str, exit_code: int = 1, detail: str = ""):
        self.message = message
        self.exit_code = exit_code
        self.detail = detail
        super().__init__(self.message)


class MissingArtifactError(WorkbenchError):
    """Exception raised when a model, dataset or report is not found."""

    def __init__(self, resource: str, identifier: str = ""):
        message = f"{resource} not found"
        if identifier:
            message += f": {identifier}"
        super().__init__(message, exit_code=1)


class ValidationError(WorkbenchError):
    """Exception raised when input validation fails."""

    def __init__(self, message: str, details: Optional[dict] = None):
        super().__init__(message, exit_code=2)
        self.details = details or {}


class ShapeMismatchError(ValidationError):
    """Array shape does not match what a layer, loss or optimizer expects."""

    def __init__(self, what: str, expected: Any, actual: Any):
        super().__init__(
            f"{what}: expected shape {expected}, got {actual}",
            details={"expected": expected, "actual": actual},
        )


class InvalidScenarioError(ValidationError):
    """Theft scenario parameters are out of bounds."""


class NonFiniteError(WorkbenchError):
    """A computation produced NaN or Inf."""

    def __init__(self, where: str, detail: str = ""):
        super().__init__(f"Non-finite value in {where}", exit_code=1, detail=detail)


class TrainingDivergedError(NonFiniteError):
    """Training loss became non-finite."""

    def __init__(self, epoch: int, loss: float):
        super().__init__("training loss", detail=f"epoch={epoch} loss={loss}")
        self.epoch = epoch
        self.message = f"Training diverged at epoch {epoch} (loss={loss})"
        self.args = (self.message,)


class VanishingGradientError(WorkbenchError):
    """Gradient norm fell below the usable threshold."""

    def __init__(self, norm: float, iteration: int):
        super().__init__(
            f"Vanishing gradient (norm={norm:.3e}) at iteration {iteration}",
            exit_code=1,
        )
        self.norm = norm
        self.iteration = iteration


class DataFormatError(WorkbenchError):
    """Raw readings could not be read or are mostly malformed."""


class InsufficientDataError(WorkbenchError):
    """Not enough rows or profiles for the requested operation."""


class GridMismatchError(WorkbenchError):
    """Two reports that must share a parameter grid do not."""


class AccessViolationError(WorkbenchError):
    """A black-box experiment queried defender gradients."""


def handle_stage_error(e: Exception, context: str = "") -> int:
    """
    Standardized error handling for CLI stages.

    Logs the error and maps it to a process exit code.

    Args:
        e: The exception that occurred
        context: Additional context about where the error occurred

    Returns:
        Exit code: the error's own code for WorkbenchError, 1 otherwise

    Usage:
        try:
            run_stage(config)
        except Exception as e:
            return handle_stage_error(e, context="train")
    """
    context_msg = f" in {context}" if context else ""
    logger.error(f"Error{context_msg}: {e}", exc_info=True)

    if isinstance(e, WorkbenchError):
        if e.detail:
            logger.error(f"  detail: {e.detail}")
        return e.exit_code
    return 1


def log_and_return_error(
    e: Exception,
    context: str = "",
    default_return: Any = None
) -> Any:
    """
    Log error and return default value without raising exception.

    Useful where a stage can continue despite errors, e.g. an unreadable
    cache sidecar is treated as a cache miss.

    Args:
        e: The exception that occurred
        context: Additional context about where the error occurred
        default_return: Value to return (default: None)

    Returns:
        The default_return value
    """
    context_msg = f" in {context}" if context else ""
    logger.error(f"Error{context_msg}: {e}", exc_info=True)
    return default_return
