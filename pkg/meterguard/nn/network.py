"""
NeuralModel: an ordered layer stack with frozen parameters.

Forward passes, loss gradients w.r.t. parameters (for training) and w.r.t. the
input (for attacks) all go through one reverse-mode pass over the stack.
"""
from __future__ import annotations

import hashlib
import logging
import threading
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence, Union

import numpy as np

from ..utils.errors import NonFiniteError, ShapeMismatchError, ValidationError
from .layers import Layer, Params, Shape, SoftmaxOutput
from .losses import (
    per_row_cross_entropy,
    softmax,
    softmax_cross_entropy_grad,
    softmax_prob_grad,
)

logger = logging.getLogger(__name__)

NORMAL = 0
THEFT = 1
NUM_CLASSES = 2
INFER_CHUNK = 1024


class Mode(str, Enum):
    TRAIN = "train"
    INFER = "infer"


@dataclass
class AccessAudit:
    """Counts forward and gradient queries made against one model."""

    forward_calls: int = 0
    gradient_calls: int = 0
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False, compare=False)

    def record_forward(self) -> None:
        with self._lock:
            self.forward_calls += 1

    def record_gradient(self) -> None:
        with self._lock:
            self.gradient_calls += 1

    def snapshot(self) -> tuple[int, int]:
        with self._lock:
            return self.forward_calls, self.gradient_calls


def _frozen(array: np.ndarray) -> np.ndarray:
    out = np.array(array, dtype=np.float64, copy=True)
    out.flags.writeable = False
    return out


def one_hot(label: Union[int, Sequence[float], np.ndarray], rows: int) -> np.ndarray:
    """Broadcast a class index or a single label row to (rows, 2)."""
    if isinstance(label, (int, np.integer)):
        if label not in (NORMAL, THEFT):
            raise ValidationError(f"Invalid class index: {label}")
        out = np.zeros((rows, NUM_CLASSES))
        out[:, label] = 1.0
        return out
    arr = np.asarray(label, dtype=np.float64)
    if arr.shape == (NUM_CLASSES,):
        return np.tile(arr, (rows, 1))
    if arr.shape != (rows, NUM_CLASSES):
        raise ShapeMismatchError("label", (rows, NUM_CLASSES), arr.shape)
    return arr


class NeuralModel:
    """
    A binary Normal/Theft classifier.

    Parameters are read-only arrays; training returns a new model instead of
    mutating this one, so a trained model can be shared between workers.
    """

    def __init__(
        self,
        layers: Sequence[Layer],
        params: Sequence[Params],
        input_shape: Shape,
        model_id: str = "model",
        temperature: float = 1.0,
    ):
        layers = tuple(layers)
        if not layers or not isinstance(layers[-1], SoftmaxOutput) or layers[-1].units != NUM_CLASSES:
            raise ValidationError("The final layer of a classifier must be SoftmaxOutput(2)")
        if len(params) != len(layers):
            raise ValidationError(f"Expected {len(layers)} parameter groups, got {len(params)}")
        if temperature <= 0:
            raise ValidationError(f"Temperature must be positive, got {temperature}")

        shape = tuple(int(d) for d in input_shape)
        self._input_shape = shape
        for layer, group in zip(layers, params):
            expected = layer.param_shapes(shape)
            if set(expected) != set(group):
                raise ValidationError(f"{layer.describe()}: expected params {sorted(expected)}, got {sorted(group)}")
            for name, dims in expected.items():
                if tuple(group[name].shape) != tuple(dims):
                    raise ShapeMismatchError(f"{layer.describe()} param {name}", dims, group[name].shape)
            shape = layer.output_shape(shape)

        self.layers: tuple[Layer, ...] = layers
        self.params: tuple[dict[str, np.ndarray], ...] = tuple(
            {name: _frozen(value) for name, value in group.items()} for group in params
        )
        self.model_id = model_id
        self.temperature = float(temperature)
        self.audit = AccessAudit()

    @classmethod
    def build(
        cls,
        layers: Sequence[Layer],
        input_shape: Shape,
        seed: int,
        model_id: str = "model",
    ) -> "NeuralModel":
        """Initialize parameters layer by layer from one seeded generator."""
        rng = np.random.default_rng(seed)
        shape = tuple(input_shape)
        params = []
        for layer in layers:
            params.append(layer.init_params(shape, rng))
            shape = layer.output_shape(shape)
        model = cls(layers, params, input_shape, model_id=model_id)
        logger.debug(f"Built {model_id}: {model.num_parameters} parameters")
        return model

    def with_params(
        self,
        params: Sequence[Params],
        model_id: Optional[str] = None,
        temperature: Optional[float] = None,
    ) -> "NeuralModel":
        return NeuralModel(
            self.layers,
            params,
            self.input_shape,
            model_id=model_id or self.model_id,
            temperature=self.temperature if temperature is None else temperature,
        )

    @property
    def input_shape(self) -> Shape:
        return self._input_shape

    @property
    def num_parameters(self) -> int:
        return int(sum(v.size for group in self.params for v in group.values()))

    def summary(self) -> str:
        lines = [f"{self.model_id} (input {self.input_shape}, T={self.temperature:g})"]
        shape = self.input_shape
        for layer, group in zip(self.layers, self.params):
            shape = layer.output_shape(shape)
            count = sum(v.size for v in group.values())
            lines.append(f"  {layer.describe():<28} -> {str(shape):<14} {count:>9,d}")
        lines.append(f"  total parameters: {self.num_parameters:,d}")
        return "\n".join(lines)

    def fingerprint(self) -> str:
        """SHA-256 over layer specs and little-endian parameter bytes."""
        digest = hashlib.sha256()
        digest.update(repr([layer.to_dict() for layer in self.layers]).encode("utf-8"))
        for group in self.params:
            for name in sorted(group):
                digest.update(name.encode("utf-8"))
                digest.update(np.ascontiguousarray(group[name], dtype="<f8").tobytes())
        return digest.hexdigest()[:16]

    def same_parameters(self, other: "NeuralModel") -> bool:
        if len(self.params) != len(other.params):
            return False
        for mine, theirs in zip(self.params, other.params):
            if set(mine) != set(theirs):
                return False
            if any(not np.array_equal(mine[k], theirs[k]) for k in mine):
                return False
        return True

    # ------------------------------------------------------------------
    # Core passes
    # ------------------------------------------------------------------

    def _as_batch(self, x: np.ndarray) -> tuple[np.ndarray, bool]:
        x = np.asarray(x, dtype=np.float64)
        if x.shape == self.input_shape:
            return x[None, ...], True
        if x.ndim == len(self.input_shape) + 1 and x.shape[1:] == self.input_shape:
            return x, False
        raise ShapeMismatchError("model input", ("N",) + self.input_shape, x.shape)

    def _forward(
        self,
        x: np.ndarray,
        training: bool,
        rng: Optional[np.random.Generator],
        params: Optional[Sequence[Params]] = None,
    ) -> tuple[np.ndarray, list]:
        params = self.params if params is None else params
        caches = []
        out = x
        for index, (layer, group) in enumerate(zip(self.layers, params)):
            out, cache = layer.forward(group, out, training, rng)
            if not np.all(np.isfinite(out)):
                raise NonFiniteError(f"{self.model_id} forward pass at layer {index} ({type(layer).__name__})")
            caches.append(cache)
        return out, caches

    def _backward(
        self,
        caches: list,
        dlogits: np.ndarray,
        params: Optional[Sequence[Params]] = None,
    ) -> tuple[np.ndarray, list[Params]]:
        params = self.params if params is None else params
        grad = dlogits
        grads: list[Params] = [None] * len(self.layers)
        for idx in reversed(range(len(self.layers))):
            grad, grads[idx] = self.layers[idx].backward(params[idx], caches[idx], grad)
        return grad, grads

    def logits(self, x: np.ndarray, mode: Mode = Mode.INFER, rng: Optional[np.random.Generator] = None) -> np.ndarray:
        batch, single = self._as_batch(x)
        z, _ = self._forward(batch, Mode(mode) is Mode.TRAIN, rng)
        return z[0] if single else z

    def forward(
        self,
        x: np.ndarray,
        mode: Mode = Mode.INFER,
        rng: Optional[np.random.Generator] = None,
        temperature: Optional[float] = None,
    ) -> np.ndarray:
        """
        Class probabilities for a batch (N, 2) or a single sample (2,).

        Args:
            x: Batch (N, *input_shape) or a single sample
            mode: infer (dropout off, deterministic) or train
            rng: Generator for dropout masks in train mode
            temperature: Softmax temperature (model's deployed value if None)

        Returns:
            Probability rows over (Normal, Theft)
        """
        self.audit.record_forward()
        batch, single = self._as_batch(x)
        training = Mode(mode) is Mode.TRAIN
        if training:
            z, _ = self._forward(batch, True, rng)
        else:
            # caches of recurrent layers grow with the batch
            z = np.concatenate(
                [self._forward(batch[i:i + INFER_CHUNK], False, None)[0] for i in range(0, len(batch), INFER_CHUNK)]
            ) if len(batch) else self._forward(batch, False, None)[0]
        probs = softmax(z, self.temperature if temperature is None else temperature)
        return probs[0] if single else probs

    def predict_theft(self, x: np.ndarray) -> np.ndarray:
        """Boolean Theft decision per row; exact ties count as Theft."""
        probs = np.atleast_2d(self.forward(x))
        return probs[:, THEFT] >= probs[:, NORMAL]

    def per_row_loss(self, x: np.ndarray, label) -> np.ndarray:
        """Cross-entropy of each row in infer mode (no gradient bookkeeping)."""
        batch, _ = self._as_batch(x)
        z, _ = self._forward(batch, False, None)
        return per_row_cross_entropy(softmax(z, self.temperature), one_hot(label, len(batch)))

    def input_gradient(self, x: np.ndarray, label) -> np.ndarray:
        """
        Gradient of the cross-entropy loss w.r.t. the input, in infer mode.

        For a batch, row i holds the gradient of row i's own loss.
        """
        self.audit.record_gradient()
        batch, single = self._as_batch(x)
        z, caches = self._forward(batch, False, None)
        probs = softmax(z, self.temperature)
        dz = softmax_cross_entropy_grad(probs, one_hot(label, len(batch)), self.temperature)
        dx, _ = self._backward(caches, dz)
        if not np.all(np.isfinite(dx)):
            raise NonFiniteError(f"{self.model_id} input gradient")
        return dx[0] if single else dx

    def prob_input_gradient(self, x: np.ndarray, class_index: int) -> np.ndarray:
        """Gradient of the selected class probability w.r.t. the input, in infer mode."""
        if class_index not in (NORMAL, THEFT):
            raise ValidationError(f"Invalid class index: {class_index}")
        self.audit.record_gradient()
        batch, single = self._as_batch(x)
        z, caches = self._forward(batch, False, None)
        probs = softmax(z, self.temperature)
        dx, _ = self._backward(caches, softmax_prob_grad(probs, class_index, self.temperature))
        if not np.all(np.isfinite(dx)):
            raise NonFiniteError(f"{self.model_id} probability gradient")
        return dx[0] if single else dx

    def logit_margin(self, x: np.ndarray) -> np.ndarray:
        """Tempered logit difference (Theft minus Normal); its sign matches the Theft decision."""
        self.audit.record_forward()
        batch, single = self._as_batch(x)
        z, _ = self._forward(batch, False, None)
        margin = (z[:, THEFT] - z[:, NORMAL]) / self.temperature
        return margin[0] if single else margin

    def margin_input_gradient(self, x: np.ndarray) -> np.ndarray:
        """Gradient of the tempered logit margin w.r.t. the input, in infer mode."""
        self.audit.record_gradient()
        batch, single = self._as_batch(x)
        z, caches = self._forward(batch, False, None)
        dlogits = np.zeros_like(z)
        dlogits[:, NORMAL] = -1.0 / self.temperature
        dlogits[:, THEFT] = 1.0 / self.temperature
        dx, _ = self._backward(caches, dlogits)
        if not np.all(np.isfinite(dx)):
            raise NonFiniteError(f"{self.model_id} margin gradient")
        return dx[0] if single else dx

    def loss_and_param_gradients(
        self,
        x: np.ndarray,
        targets: np.ndarray,
        params: Sequence[Params],
        temperature: float,
        rng: np.random.Generator,
    ) -> tuple[float, list[Params]]:
        """Mean training loss (train-mode dropout) and its parameter gradients."""
        z, caches = self._forward(x, True, rng, params)
        probs = softmax(z, temperature)
        loss = float(np.mean(per_row_cross_entropy(probs, targets)))
        dz = softmax_cross_entropy_grad(probs, targets, temperature) / len(x)
        _, grads = self._backward(caches, dz, params)
        return loss, grads


def forward(model: NeuralModel, batch: np.ndarray, mode: Mode = Mode.INFER) -> np.ndarray:
    return model.forward(batch, mode)


def input_gradient(model: NeuralModel, x: np.ndarray, label) -> np.ndarray:
    return model.input_gradient(x, label)


def prob_input_gradient(model: NeuralModel, x: np.ndarray, class_index: int) -> np.ndarray:
    return model.prob_input_gradient(x, class_index)
