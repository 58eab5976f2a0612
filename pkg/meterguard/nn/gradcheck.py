"""Central-difference gradient oracle used to check the analytic gradients."""
from typing import Callable

import numpy as np

from ..utils.errors import ValidationError
from .network import NeuralModel


def central_difference(fn: Callable[[np.ndarray], float], x: np.ndarray, h: float = 1e-4) -> np.ndarray:
    """(f(x + h e_i) - f(x - h e_i)) / 2h for every coordinate of x."""
    if h <= 0:
        raise ValidationError(f"Finite-difference step must be positive, got {h}")
    x = np.asarray(x, dtype=np.float64)
    grad = np.empty_like(x)
    flat = grad.reshape(-1)
    for i in range(x.size):
        bump = np.zeros(x.size)
        bump[i] = h
        bump = bump.reshape(x.shape)
        flat[i] = (fn(x + bump) - fn(x - bump)) / (2.0 * h)
    return grad


def finite_diff_gradient(model: NeuralModel, x: np.ndarray, label, h: float = 1e-4) -> np.ndarray:
    """
    Numerical gradient of the cross-entropy loss w.r.t. one input, infer mode.

    All 2·D perturbed copies go through the model as a single batch.

    Args:
        model: Model under test
        x: One sample shaped like model.input_shape
        label: Class index or one-hot row
        h: Perturbation size (> 0)

    Returns:
        Array shaped like x
    """
    if h <= 0:
        raise ValidationError(f"Finite-difference step must be positive, got {h}")
    x = np.asarray(x, dtype=np.float64)
    d = x.size
    eye = np.eye(d).reshape((d,) + x.shape) * h
    batch = np.concatenate([x[None] + eye, x[None] - eye], axis=0)
    losses = model.per_row_loss(batch, label)
    return ((losses[:d] - losses[d:]) / (2.0 * h)).reshape(x.shape)


def max_relative_error(analytic: np.ndarray, numeric: np.ndarray, abs_floor: float = 1e-8) -> float:
    """
    Largest elementwise relative error; entries with |analytic| below
    abs_floor are compared absolutely.
    """
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    diff = np.abs(analytic - numeric)
    scale = np.abs(analytic)
    errors = np.where(scale < abs_floor, diff, diff / np.maximum(scale, abs_floor))
    return float(errors.max()) if errors.size else 0.0
