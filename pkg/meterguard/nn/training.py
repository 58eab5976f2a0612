"""
Mini-batch training loop.

Usage:
    result = train(model, dataset, TrainConfig(epochs=10, seed=3))
    trained = result.model
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional, Protocol

import numpy as np

from ..schemas.training import TrainConfig
from ..utils.errors import InsufficientDataError, ShapeMismatchError, TrainingDivergedError
from .network import NUM_CLASSES, NeuralModel, one_hot
from .optim import init_state, rmsprop_step

logger = logging.getLogger(__name__)


class LabeledData(Protocol):
    profiles: np.ndarray
    labels: np.ndarray


@dataclass(frozen=True)
class TrainResult:
    model: NeuralModel
    loss_history: tuple[float, ...]

    @property
    def final_loss(self) -> Optional[float]:
        return self.loss_history[-1] if self.loss_history else None


def _targets(dataset: LabeledData, soft_targets: Optional[np.ndarray]) -> np.ndarray:
    n = len(dataset.profiles)
    if soft_targets is not None:
        soft = np.asarray(soft_targets, dtype=np.float64)
        if soft.shape != (n, NUM_CLASSES):
            raise ShapeMismatchError("soft targets", (n, NUM_CLASSES), soft.shape)
        return soft
    labels = np.asarray(dataset.labels, dtype=np.int64)
    targets = np.zeros((n, NUM_CLASSES))
    targets[np.arange(n), labels] = 1.0
    return targets


def train(
    model: NeuralModel,
    dataset: LabeledData,
    config: TrainConfig,
    soft_targets: Optional[np.ndarray] = None,
) -> TrainResult:
    """
    Fit a model with RMSprop on cross-entropy at config.temperature.

    Args:
        model: Initialized model (not modified)
        dataset: Anything with (N, 48) profiles and (N,) integer labels
        config: Hyper-parameters; the seed drives shuffling and dropout masks
        soft_targets: Optional (N, 2) probability rows replacing hard labels

    Returns:
        TrainResult with a new model and the mean loss of each epoch

    Raises:
        InsufficientDataError: Empty dataset
        TrainingDivergedError: A non-finite epoch loss
    """
    profiles = np.asarray(dataset.profiles, dtype=np.float64)
    if len(profiles) == 0:
        raise InsufficientDataError("Cannot train on an empty dataset")
    if profiles.shape[1:] != model.input_shape:
        raise ShapeMismatchError("training profiles", ("N",) + model.input_shape, profiles.shape)
    targets = _targets(dataset, soft_targets)

    if config.epochs == 0:
        return TrainResult(model=model, loss_history=())

    rng = np.random.default_rng(config.seed)
    params = [dict(group) for group in model.params]
    state = init_state(params)
    history: list[float] = []
    n = len(profiles)

    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, config.batch_size):
            idx = order[start:start + config.batch_size]
            loss, grads = model.loss_and_param_gradients(
                profiles[idx], targets[idx], params, config.temperature, rng
            )
            params, state = rmsprop_step(params, grads, state, config)
            total += loss * len(idx)
        epoch_loss = total / n
        if not np.isfinite(epoch_loss):
            logger.error(f"❌ {model.model_id}: loss diverged at epoch {epoch}")
            raise TrainingDivergedError(epoch, epoch_loss)
        history.append(epoch_loss)
        logger.debug(f"{model.model_id} epoch {epoch}/{config.epochs} loss={epoch_loss:.5f}")

    logger.info(f"✅ Trained {model.model_id}: {config.epochs} epochs, final loss {history[-1]:.4f}")
    return TrainResult(model=model.with_params(params), loss_history=tuple(history))


def accuracy(model: NeuralModel, dataset: LabeledData) -> float:
    predicted = model.predict_theft(dataset.profiles).astype(np.int64)
    return float(np.mean(predicted == np.asarray(dataset.labels, dtype=np.int64)))


__all__ = ["LabeledData", "TrainResult", "accuracy", "one_hot", "train"]
