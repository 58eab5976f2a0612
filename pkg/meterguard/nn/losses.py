"""Softmax and cross-entropy on (N, classes) arrays."""
import numpy as np

from ..utils.errors import ShapeMismatchError, ValidationError

# Probabilities are floored before the log
PROB_FLOOR = 1e-12


def softmax(logits: np.ndarray, temperature: float = 1.0) -> np.ndarray:
    """
    Temperature softmax over the last axis, computed as softmax(z / T).

    Max-subtraction keeps large logits (and T=100 distillation) from
    overflowing.
    """
    if temperature <= 0:
        raise ValidationError(f"Softmax temperature must be positive, got {temperature}")
    scaled = logits / temperature
    shifted = scaled - scaled.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def per_row_cross_entropy(probs: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """Negative log-likelihood of each row; labels may be one-hot or probability rows."""
    if probs.shape != labels.shape:
        raise ShapeMismatchError("cross_entropy labels", probs.shape, labels.shape)
    return -np.sum(labels * np.log(np.maximum(probs, PROB_FLOOR)), axis=-1)


def cross_entropy(probs: np.ndarray, labels: np.ndarray) -> float:
    """
    Mean negative log-likelihood over the batch.

    Args:
        probs: (N, 2) probability rows
        labels: (N, 2) one-hot (or soft) label rows

    Returns:
        Scalar loss
    """
    probs = np.atleast_2d(np.asarray(probs, dtype=np.float64))
    labels = np.atleast_2d(np.asarray(labels, dtype=np.float64))
    return float(np.mean(per_row_cross_entropy(probs, labels)))


def softmax_cross_entropy_grad(probs: np.ndarray, labels: np.ndarray, temperature: float = 1.0) -> np.ndarray:
    """d(per-row loss)/d(logits) for probs = softmax(logits / T)."""
    return (probs - labels) / temperature


def softmax_prob_grad(probs: np.ndarray, class_index: int, temperature: float = 1.0) -> np.ndarray:
    """d p_k / d(logits) per row: p_k (e_k - p) / T."""
    onehot = np.zeros(probs.shape[-1])
    onehot[class_index] = 1.0
    return probs[:, [class_index]] * (onehot - probs) / temperature
