"""
Layer kernels for the detection classifiers.

Every layer is an immutable spec plus pure forward/backward functions:
parameters and per-call caches are passed in and returned, never stored on the
layer, so one trained model can serve many readers at once.

Array conventions (float64, batch first):
    Dense / SoftmaxOutput   (N, features)
    Conv2D / MaxPool2D      (N, rows, cols, channels)
    LSTM                    (N, timesteps, features)
"""
from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import asdict, dataclass
from enum import Enum
from typing import Any, ClassVar, Optional

import numpy as np

from ..utils.errors import ShapeMismatchError, ValidationError

Params = dict[str, np.ndarray]
Shape = tuple[int, ...]


class Activation(str, Enum):
    RELU = "relu"
    LINEAR = "linear"


def glorot_uniform(fan_in: int, fan_out: int, shape: Shape, rng: np.random.Generator) -> np.ndarray:
    """Uniform in ±sqrt(6 / (fan_in + fan_out))."""
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


def sigmoid(x: np.ndarray) -> np.ndarray:
    # tanh form never overflows
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def _activate(z: np.ndarray, activation: Activation) -> np.ndarray:
    if activation is Activation.RELU:
        return np.maximum(z, 0.0)
    return z


def _activation_grad(grad: np.ndarray, z: np.ndarray, activation: Activation) -> np.ndarray:
    if activation is Activation.RELU:
        return grad * (z > 0.0)
    return grad


class Layer(ABC):
    """Base class for all layer specs."""

    kind: ClassVar[str] = "layer"

    def output_shape(self, input_shape: Shape) -> Shape:
        return input_shape

    def init_params(self, input_shape: Shape, rng: np.random.Generator) -> Params:
        return {}

    def param_shapes(self, input_shape: Shape) -> dict[str, Shape]:
        return {}

    @abstractmethod
    def forward(
        self,
        params: Params,
        x: np.ndarray,
        training: bool,
        rng: Optional[np.random.Generator],
    ) -> tuple[np.ndarray, Any]:
        """Return (output, cache)."""

    @abstractmethod
    def backward(self, params: Params, cache: Any, grad: np.ndarray) -> tuple[np.ndarray, Params]:
        """Return (gradient w.r.t. input, gradients w.r.t. params)."""

    def to_dict(self) -> dict:
        payload = {k: (v.value if isinstance(v, Enum) else v) for k, v in asdict(self).items()}
        payload["kind"] = self.kind
        return payload

    def describe(self) -> str:
        return self.kind


@dataclass(frozen=True)
class Dense(Layer):
    units: int
    activation: Activation = Activation.RELU

    kind: ClassVar[str] = "dense"

    def __post_init__(self):
        if self.units < 1:
            raise ValidationError(f"Dense units must be >= 1, got {self.units}")
        object.__setattr__(self, "activation", Activation(self.activation))

    def output_shape(self, input_shape: Shape) -> Shape:
        if len(input_shape) != 1:
            raise ShapeMismatchError(f"{self.kind} input", "(features,)", input_shape)
        return (self.units,)

    def param_shapes(self, input_shape: Shape) -> dict[str, Shape]:
        return {"W": (input_shape[0], self.units), "b": (self.units,)}

    def init_params(self, input_shape: Shape, rng: np.random.Generator) -> Params:
        self.output_shape(input_shape)
        fan_in = input_shape[0]
        return {
            "W": glorot_uniform(fan_in, self.units, (fan_in, self.units), rng),
            "b": np.zeros(self.units),
        }

    def forward(self, params, x, training, rng):
        z = x @ params["W"] + params["b"]
        return _activate(z, self.activation), (x, z)

    def backward(self, params, cache, grad):
        x, z = cache
        grad = _activation_grad(grad, z, self.activation)
        return grad @ params["W"].T, {"W": x.T @ grad, "b": grad.sum(axis=0)}

    def describe(self) -> str:
        return f"Dense({self.units}, {self.activation.value})"


@dataclass(frozen=True)
class SoftmaxOutput(Dense):
    """Final linear layer emitting class logits; the model applies the softmax."""

    units: int = 2
    activation: Activation = Activation.LINEAR

    kind: ClassVar[str] = "softmax_output"

    def __post_init__(self):
        super().__post_init__()
        if self.activation is not Activation.LINEAR:
            raise ValidationError("SoftmaxOutput must be linear")

    def to_dict(self) -> dict:
        return {"kind": self.kind, "units": self.units}

    def describe(self) -> str:
        return f"Dense({self.units}) softmax"


@dataclass(frozen=True)
class Conv2D(Layer):
    """Stride-1, 'same'-padded square convolution."""

    filters: int
    activation: Activation = Activation.RELU
    kernel: int = 3

    kind: ClassVar[str] = "conv2d"

    def __post_init__(self):
        if self.filters < 1:
            raise ValidationError(f"Conv2D filters must be >= 1, got {self.filters}")
        if self.kernel < 1 or self.kernel % 2 == 0:
            raise ValidationError(f"Conv2D kernel must be odd, got {self.kernel}")
        object.__setattr__(self, "activation", Activation(self.activation))

    def output_shape(self, input_shape: Shape) -> Shape:
        if len(input_shape) != 3:
            raise ShapeMismatchError(f"{self.kind} input", "(rows, cols, channels)", input_shape)
        return (input_shape[0], input_shape[1], self.filters)

    def param_shapes(self, input_shape: Shape) -> dict[str, Shape]:
        k = self.kernel
        return {"K": (k, k, input_shape[2], self.filters), "b": (self.filters,)}

    def init_params(self, input_shape: Shape, rng: np.random.Generator) -> Params:
        self.output_shape(input_shape)
        k, channels = self.kernel, input_shape[2]
        return {
            "K": glorot_uniform(k * k * channels, k * k * self.filters, (k, k, channels, self.filters), rng),
            "b": np.zeros(self.filters),
        }

    def forward(self, params, x, training, rng):
        k, pad = self.kernel, self.kernel // 2
        _, rows, cols, _ = x.shape
        xp = np.pad(x, ((0, 0), (pad, pad), (pad, pad), (0, 0)))
        z = np.zeros(x.shape[:3] + (self.filters,)) + params["b"]
        for di in range(k):
            for dj in range(k):
                z += xp[:, di:di + rows, dj:dj + cols, :] @ params["K"][di, dj]
        return _activate(z, self.activation), (xp, z)

    def backward(self, params, cache, grad):
        xp, z = cache
        k, pad = self.kernel, self.kernel // 2
        _, rows, cols, _ = z.shape
        grad = _activation_grad(grad, z, self.activation)
        dK = np.empty_like(params["K"])
        dxp = np.zeros_like(xp)
        for di in range(k):
            for dj in range(k):
                window = xp[:, di:di + rows, dj:dj + cols, :]
                dK[di, dj] = np.tensordot(window, grad, axes=([0, 1, 2], [0, 1, 2]))
                dxp[:, di:di + rows, dj:dj + cols, :] += grad @ params["K"][di, dj].T
        dx = dxp[:, pad:pad + rows, pad:pad + cols, :]
        return dx, {"K": dK, "b": grad.sum(axis=(0, 1, 2))}

    def describe(self) -> str:
        return f"Conv2D({self.filters}, {self.kernel}x{self.kernel}, {self.activation.value})"


@dataclass(frozen=True)
class MaxPool2D(Layer):
    pool: int = 2

    kind: ClassVar[str] = "maxpool2d"

    def output_shape(self, input_shape: Shape) -> Shape:
        if len(input_shape) != 3:
            raise ShapeMismatchError(f"{self.kind} input", "(rows, cols, channels)", input_shape)
        rows, cols, channels = input_shape
        if rows % self.pool or cols % self.pool:
            raise ShapeMismatchError(f"{self.kind} input (divisible by {self.pool})", "even grid", input_shape)
        return (rows // self.pool, cols // self.pool, channels)

    def forward(self, params, x, training, rng):
        n, rows, cols, channels = x.shape
        p = self.pool
        windows = (
            x.reshape(n, rows // p, p, cols // p, p, channels)
            .transpose(0, 1, 3, 5, 2, 4)
            .reshape(n, rows // p, cols // p, channels, p * p)
        )
        # first maximum wins ties
        idx = windows.argmax(axis=-1)
        y = np.take_along_axis(windows, idx[..., None], axis=-1)[..., 0]
        return y, (x.shape, idx)

    def backward(self, params, cache, grad):
        (n, rows, cols, channels), idx = cache
        p = self.pool
        dwin = np.zeros(idx.shape + (p * p,))
        np.put_along_axis(dwin, idx[..., None], grad[..., None], axis=-1)
        dx = (
            dwin.reshape(n, rows // p, cols // p, channels, p, p)
            .transpose(0, 1, 4, 2, 5, 3)
            .reshape(n, rows, cols, channels)
        )
        return dx, {}

    def describe(self) -> str:
        return f"MaxPool2D({self.pool}x{self.pool})"


@dataclass(frozen=True)
class Dropout(Layer):
    rate: float

    kind: ClassVar[str] = "dropout"

    def __post_init__(self):
        if not 0.0 <= self.rate < 1.0:
            raise ValidationError(f"Dropout rate must be in [0, 1), got {self.rate}")

    def forward(self, params, x, training, rng):
        if not training or self.rate == 0.0:
            return x, None
        if rng is None:
            raise ValidationError("Dropout in train mode needs a generator")
        mask = (rng.random(x.shape) >= self.rate) / (1.0 - self.rate)
        return x * mask, mask

    def backward(self, params, cache, grad):
        if cache is None:
            return grad, {}
        return grad * cache, {}

    def describe(self) -> str:
        return f"Dropout({self.rate})"


@dataclass(frozen=True)
class Flatten(Layer):
    kind: ClassVar[str] = "flatten"

    def output_shape(self, input_shape: Shape) -> Shape:
        return (int(np.prod(input_shape)),)

    def forward(self, params, x, training, rng):
        return x.reshape(x.shape[0], -1), x.shape

    def backward(self, params, cache, grad):
        return grad.reshape(cache), {}


@dataclass(frozen=True)
class Reshape(Layer):
    target_shape: tuple[int, ...]

    kind: ClassVar[str] = "reshape"

    def __post_init__(self):
        object.__setattr__(self, "target_shape", tuple(int(d) for d in self.target_shape))
        if any(d < 1 for d in self.target_shape):
            raise ValidationError(f"Reshape dimensions must be positive, got {self.target_shape}")

    def output_shape(self, input_shape: Shape) -> Shape:
        if int(np.prod(input_shape)) != int(np.prod(self.target_shape)):
            raise ShapeMismatchError(f"{self.kind} input", f"{int(np.prod(self.target_shape))} values", input_shape)
        return self.target_shape

    def forward(self, params, x, training, rng):
        return x.reshape((x.shape[0],) + self.target_shape), x.shape

    def backward(self, params, cache, grad):
        return grad.reshape(cache), {}

    def to_dict(self) -> dict:
        return {"kind": self.kind, "target_shape": list(self.target_shape)}

    def describe(self) -> str:
        return f"Reshape{self.target_shape}"


@dataclass(frozen=True)
class LSTM(Layer):
    """
    Long short-term memory layer (gate order: input, forget, candidate, output).

    With return_sequences the full hidden sequence (N, T, units) is emitted,
    otherwise only the final hidden state (N, units).
    """

    units: int
    return_sequences: bool = False

    kind: ClassVar[str] = "lstm"

    def __post_init__(self):
        if self.units < 1:
            raise ValidationError(f"LSTM units must be >= 1, got {self.units}")

    def output_shape(self, input_shape: Shape) -> Shape:
        if len(input_shape) != 2:
            raise ShapeMismatchError(f"{self.kind} input", "(timesteps, features)", input_shape)
        if self.return_sequences:
            return (input_shape[0], self.units)
        return (self.units,)

    def param_shapes(self, input_shape: Shape) -> dict[str, Shape]:
        u = self.units
        return {"W": (input_shape[1], 4 * u), "U": (u, 4 * u), "b": (4 * u,)}

    def init_params(self, input_shape: Shape, rng: np.random.Generator) -> Params:
        self.output_shape(input_shape)
        u, features = self.units, input_shape[1]
        b = np.zeros(4 * u)
        b[u:2 * u] = 1.0  # forget-gate bias
        return {
            "W": glorot_uniform(features, 4 * u, (features, 4 * u), rng),
            "U": glorot_uniform(u, 4 * u, (u, 4 * u), rng),
            "b": b,
        }

    def forward(self, params, x, training, rng):
        n, steps, _ = x.shape
        u = self.units
        W, U = params["W"], params["U"]
        projected = x @ W + params["b"]
        gates = np.empty((steps, n, 4 * u))
        cells = np.zeros((steps + 1, n, u))
        hidden = np.zeros((steps + 1, n, u))
        for t in range(steps):
            a = projected[:, t] + hidden[t] @ U
            gates[t, :, :u] = sigmoid(a[:, :u])
            gates[t, :, u:2 * u] = sigmoid(a[:, u:2 * u])
            gates[t, :, 2 * u:3 * u] = np.tanh(a[:, 2 * u:3 * u])
            gates[t, :, 3 * u:] = sigmoid(a[:, 3 * u:])
            i, f, g, o = np.split(gates[t], 4, axis=1)
            cells[t + 1] = f * cells[t] + i * g
            hidden[t + 1] = o * np.tanh(cells[t + 1])
        out = hidden[1:].transpose(1, 0, 2) if self.return_sequences else hidden[steps]
        return out, (x, gates, cells, hidden)

    def backward(self, params, cache, grad):
        x, gates, cells, hidden = cache
        steps, n, four_u = gates.shape
        u = four_u // 4
        W, U = params["W"], params["U"]
        if self.return_sequences:
            dh_seq = grad.transpose(1, 0, 2)
        else:
            dh_seq = np.zeros((steps, n, u))
            dh_seq[-1] = grad
        da_all = np.empty((steps, n, four_u))
        dh_next = np.zeros((n, u))
        dc_next = np.zeros((n, u))
        for t in reversed(range(steps)):
            i, f, g, o = np.split(gates[t], 4, axis=1)
            tanh_c = np.tanh(cells[t + 1])
            dh = dh_seq[t] + dh_next
            dc = dc_next + dh * o * (1.0 - tanh_c ** 2)
            da_all[t, :, :u] = dc * g * i * (1.0 - i)
            da_all[t, :, u:2 * u] = dc * cells[t] * f * (1.0 - f)
            da_all[t, :, 2 * u:3 * u] = dc * i * (1.0 - g ** 2)
            da_all[t, :, 3 * u:] = dh * tanh_c * o * (1.0 - o)
            dc_next = dc * f
            dh_next = da_all[t] @ U.T
        da = da_all.transpose(1, 0, 2)
        grads = {
            "W": np.tensordot(x, da, axes=([0, 1], [0, 1])),
            "U": np.tensordot(hidden[:-1], da_all, axes=([0, 1], [0, 1])),
            "b": da.sum(axis=(0, 1)),
        }
        return da @ W.T, grads

    def describe(self) -> str:
        tail = ", sequences" if self.return_sequences else ""
        return f"LSTM({self.units}{tail})"


LAYER_TYPES: dict[str, type[Layer]] = {
    cls.kind: cls for cls in (Dense, SoftmaxOutput, Conv2D, MaxPool2D, Dropout, Flatten, Reshape, LSTM)
}


def layer_from_dict(payload: dict) -> Layer:
    """Rebuild a layer spec from its to_dict() form."""
    data = dict(payload)
    kind = data.pop("kind", None)
    if kind not in LAYER_TYPES:
        raise ValidationError(f"Unknown layer kind: {kind}")
    if kind == "reshape":
        data["target_shape"] = tuple(data["target_shape"])
    return LAYER_TYPES[kind](**data)
