"""
The six detection classifiers: defender and attacker variants of a
feed-forward, a convolutional and a recurrent network.

Attacker variants have the same topology as the defender of their family but
different widths. ``width_scale`` multiplies every hidden width (rounded half
up, at least 2); the two-way output layer is never scaled.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

from ..nn.layers import LSTM, Conv2D, Dense, Dropout, Flatten, Layer, MaxPool2D, Reshape, SoftmaxOutput
from ..nn.network import NeuralModel
from ..utils.common import READINGS_PER_DAY, round_half_up
from ..utils.errors import ValidationError

logger = logging.getLogger(__name__)

DROPOUT_RATE = 0.25
# CNN inputs are laid out as a 6 x 8 grid with one channel
CNN_GRID = (6, 8, 1)


class Family(str, Enum):
    FNN = "fnn"
    CNN = "cnn"
    RNN = "rnn"


class Side(str, Enum):
    DEFENDER = "defender"
    ATTACKER = "attacker"


# Hidden widths per (family, side), in layer order
WIDTHS: dict[tuple[Family, Side], tuple[int, ...]] = {
    (Family.FNN, Side.DEFENDER): (128, 256, 128, 64, 32),
    (Family.FNN, Side.ATTACKER): (168, 328, 168, 128, 64),
    (Family.CNN, Side.DEFENDER): (128, 128, 32),
    (Family.CNN, Side.ATTACKER): (156, 214, 48),
    (Family.RNN, Side.DEFENDER): (256, 168, 128),
    (Family.RNN, Side.ATTACKER): (246, 148, 108),
}


@dataclass(frozen=True)
class ArchitectureId:
    family: Family
    side: Side
    width_scale: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "family", Family(self.family))
        object.__setattr__(self, "side", Side(self.side))
        if self.width_scale <= 0:
            raise ValidationError(f"width_scale must be positive, got {self.width_scale}")

    @property
    def name(self) -> str:
        return f"{self.family.value}-{self.side.value}"

    def model_id(self, distilled: bool = False) -> str:
        return f"{self.name}-distilled" if distilled else self.name

    @classmethod
    def parse(cls, text: str, width_scale: float = 1.0) -> "ArchitectureId":
        """'fnn-defender' -> ArchitectureId(FNN, DEFENDER, width_scale)."""
        family, _, side = text.lower().partition("-")
        try:
            return cls(Family(family), Side(side.replace("-distilled", "")), width_scale)
        except ValueError as e:
            raise ValidationError(f"Unknown architecture: {text}") from e


def scaled_width(units: int, scale: float) -> int:
    return max(2, round_half_up(units * scale))


def layer_stack(arch: ArchitectureId) -> tuple[tuple[int, ...], list[Layer]]:
    """Input shape and layer list for an architecture."""
    w = [scaled_width(units, arch.width_scale) for units in WIDTHS[(arch.family, arch.side)]]

    if arch.family is Family.FNN:
        layers: list[Layer] = [
            Dense(w[0]),
            Dense(w[1]),
            Dense(w[2]),
            Dense(w[3]),
            Dropout(DROPOUT_RATE),
            Dense(w[4]),
            Dropout(DROPOUT_RATE),
            SoftmaxOutput(2),
        ]
    elif arch.family is Family.CNN:
        layers = [
            Reshape(CNN_GRID),
            Conv2D(w[0]),
            Conv2D(w[1]),
            MaxPool2D(2),
            Dropout(DROPOUT_RATE),
            Flatten(),
            Dense(w[2]),
            SoftmaxOutput(2),
        ]
    else:
        # every LSTM feeding another LSTM returns its full sequence
        layers = [
            Reshape((READINGS_PER_DAY, 1)),
            LSTM(w[0], return_sequences=True),
            Dropout(DROPOUT_RATE),
            LSTM(w[1], return_sequences=True),
            Dropout(DROPOUT_RATE),
            LSTM(w[2]),
            SoftmaxOutput(2),
        ]
    return (READINGS_PER_DAY,), layers


def build_model(arch: ArchitectureId, seed: int) -> NeuralModel:
    """
    Initialize the classifier for an architecture id.

    Args:
        arch: Family, side and width scale
        seed: Initialization seed; same (arch, seed) gives identical parameters

    Returns:
        Untrained NeuralModel with model_id "<family>-<side>"
    """
    input_shape, layers = layer_stack(arch)
    model = NeuralModel.build(layers, input_shape, seed=seed, model_id=arch.model_id())
    logger.info(f"🧱 Built {arch.name} (scale {arch.width_scale:g}, {model.num_parameters:,d} parameters)")
    logger.debug(model.summary())
    return model


def all_architectures(width_scale: float, sides: Sequence[Side] = (Side.DEFENDER, Side.ATTACKER)) -> list[ArchitectureId]:
    return [ArchitectureId(family, side, width_scale) for side in sides for family in Family]
