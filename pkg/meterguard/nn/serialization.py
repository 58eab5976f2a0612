"""
Model files.

A model is stored as a NumPy .npz archive: one little-endian float64 array per
parameter (``L{layer}_{name}``) plus a ``__meta__`` JSON string holding the
format version, layer specs, input shape, model id and deploy temperature.
Loading never unpickles.
"""
import json
import logging
import zipfile
from pathlib import Path
from typing import Union

import numpy as np

from ..utils.common import atomic_write
from ..utils.errors import DataFormatError, MissingArtifactError
from .layers import layer_from_dict
from .network import NeuralModel

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1
META_KEY = "__meta__"


def save_model(model: NeuralModel, path: Union[str, Path]) -> Path:
    """Write a model archive atomically and return its path."""
    meta = {
        "format_version": FORMAT_VERSION,
        "model_id": model.model_id,
        "temperature": model.temperature,
        "input_shape": list(model.input_shape),
        "layers": [layer.to_dict() for layer in model.layers],
    }
    arrays = {META_KEY: np.array(json.dumps(meta, sort_keys=True))}
    for idx, group in enumerate(model.params):
        for name, value in group.items():
            arrays[f"L{idx}_{name}"] = np.ascontiguousarray(value, dtype="<f8")

    def _write(tmp: Path) -> None:
        with open(tmp, "wb") as fh:
            np.savez(fh, **arrays)

    path = atomic_write(Path(path), _write)
    logger.debug(f"Saved {model.model_id} to {path}")
    return path


def load_model(path: Union[str, Path]) -> NeuralModel:
    """
    Read a model archive written by save_model.

    Raises:
        MissingArtifactError: File does not exist
        DataFormatError: Archive is unreadable or of an unknown version
    """
    path = Path(path)
    if not path.exists():
        raise MissingArtifactError("Model file", str(path))
    try:
        with np.load(path, allow_pickle=False) as archive:
            meta = json.loads(str(archive[META_KEY]))
            if meta.get("format_version") != FORMAT_VERSION:
                raise DataFormatError(f"Unsupported model format version: {meta.get('format_version')}")
            layers = [layer_from_dict(spec) for spec in meta["layers"]]
            params = []
            for idx in range(len(layers)):
                prefix = f"L{idx}_"
                params.append({
                    key[len(prefix):]: archive[key].astype(np.float64)
                    for key in archive.files
                    if key.startswith(prefix)
                })
    except DataFormatError:
        raise
    except (KeyError, ValueError, OSError, zipfile.BadZipFile) as e:
        raise DataFormatError(f"Unreadable model file {path}: {e}") from e

    return NeuralModel(
        layers,
        params,
        tuple(meta["input_shape"]),
        model_id=meta["model_id"],
        temperature=meta["temperature"],
    )
