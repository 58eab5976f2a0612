from __future__ import annotations

import logging
import os
from pathlib import Path
from typing import Any, Mapping, Optional, Union

import pydantic
from dotenv import dotenv_values, load_dotenv

from .schemas.run import RunConfig
from .utils.errors import MissingArtifactError, ValidationError

logger = logging.getLogger(__name__)

# Load environment variables - .env in the project root, never overriding the shell
project_root = Path(__file__).resolve().parent.parent
env_path = project_root / ".env"
load_dotenv(env_path, override=False)


class Settings:
    def __init__(self) -> None:
        # Logging
        self.log_level: str = os.getenv("METERGUARD_LOG_LEVEL", "INFO").upper()

        # Default locations (CLI flags and config files win)
        self.workdir: str = os.getenv("METERGUARD_WORKDIR", "./workdir")
        self.reports_dir: str = os.getenv("METERGUARD_REPORTS", "./reports")

        # Worker pool size
        self.jobs: int = int(os.getenv("METERGUARD_JOBS", "1"))


settings = Settings()


def _normalize_key(key: str) -> str:
    return key.strip().lower().replace("-", "_")


def load_run_config(
    path: Optional[Union[str, Path]] = None,
    overrides: Optional[Mapping[str, Any]] = None,
) -> RunConfig:
    """
    Build a RunConfig from a flat key=value file plus CLI overrides.

    Args:
        path: Config file (dotenv syntax, '#' comments); None for defaults only
        overrides: Values from flags; None entries are ignored

    Returns:
        Validated RunConfig

    Raises:
        MissingArtifactError: path given but missing
        ValidationError: unknown keys or invalid values

    Usage:
        cfg = load_run_config("desk.conf", {"seed": 7})
    """
    merged: dict[str, Any] = {
        "workdir": settings.workdir,
        "reports_out": settings.reports_dir,
        "jobs": settings.jobs,
    }

    if path is not None:
        path = Path(path)
        if not path.exists():
            raise MissingArtifactError("Config file", str(path))
        for key, value in dotenv_values(path).items():
            if value is None:
                raise ValidationError(f"Config key without a value: {key}")
            merged[_normalize_key(key)] = value
        logger.debug(f"Loaded config file {path}")

    for key, value in (overrides or {}).items():
        if value is not None:
            merged[_normalize_key(key)] = value

    unknown = sorted(set(merged) - set(RunConfig.model_fields))
    if unknown:
        raise ValidationError(f"Unknown config keys: {', '.join(unknown)}", details={"unknown": unknown})

    try:
        return RunConfig(**merged)
    except pydantic.ValidationError as e:
        raise ValidationError(f"Invalid run configuration: {e}", details={"errors": e.errors()}) from e
