"""
Common utility functions.

Seeded generator derivation, rounding, hashing and file helpers shared by the
data, attack and report modules.
"""
import hashlib
import json
import math
import os
import tempfile
from pathlib import Path
from typing import Any, Callable

import numpy as np

# Half-hourly readings per meter-day
READINGS_PER_DAY = 48


def derive_rng(seed: int, *stream: int) -> np.random.Generator:
    """
    Create an independent generator for a (seed, stream...) coordinate.

    Every vector of an attack batch, every worker and every pipeline stage
    owns its generator; none are shared.

    Args:
        seed: Master seed
        stream: Extra integers identifying the stream (e.g. vector index)

    Returns:
        numpy Generator
    """
    return np.random.default_rng([int(seed) & 0xFFFFFFFFFFFFFFFF, *(int(s) for s in stream)])


def round_half_up(x: float) -> int:
    """Round to nearest integer with halves going up (Python's round() is banker's)."""
    return int(math.floor(x + 0.5))


def canonical_json(obj: Any) -> str:
    """JSON with sorted keys and no whitespace variance."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), default=str)


def content_hash(obj: Any, length: int = 12) -> str:
    """SHA-256 prefix of the canonical JSON of obj."""
    return hashlib.sha256(canonical_json(obj).encode("utf-8")).hexdigest()[:length]


def file_hash(path: Path, length: int = 16) -> str:
    """SHA-256 prefix of a file's bytes."""
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()[:length]


def atomic_write(path: Path, writer: Callable[[Path], None]) -> Path:
    """
    Write a file through a temporary sibling and rename it into place.

    Args:
        path: Final destination
        writer: Callable receiving the temporary path

    Returns:
        The destination path
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    os.close(fd)
    tmp = Path(tmp_name)
    try:
        writer(tmp)
        os.replace(tmp, path)
    finally:
        if tmp.exists():
            tmp.unlink()
    return path


def write_json(path: Path, payload: Any) -> Path:
    """Write pretty, key-sorted JSON atomically."""
    text = json.dumps(payload, indent=2, sort_keys=True, default=str) + "\n"
    return atomic_write(path, lambda tmp: tmp.write_text(text, encoding="utf-8"))


def log_grid(start_exp: float, stop_exp: float, points: int) -> list[float]:
    """Logarithmic grid 10^start … 10^stop with `points` entries."""
    return [float(v) for v in np.logspace(start_exp, stop_exp, points)]


def parse_float_list(text: str) -> list[float]:
    """Parse '0.1,0.2,0.3' into floats; 'log:a:b:n' expands to a log grid."""
    text = text.strip()
    if text.startswith("log:"):
        _, a, b, n = text.split(":")
        return log_grid(float(a), float(b), int(n))
    return [float(part) for part in text.split(",") if part.strip()]
