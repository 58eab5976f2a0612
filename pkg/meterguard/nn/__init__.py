"""
Small NumPy neural-network engine: layers, temperature softmax, reverse-mode
gradients w.r.t. parameters and inputs, RMSprop training and model files.
"""
from .layers import (
    LSTM,
    Activation,
    Conv2D,
    Dense,
    Dropout,
    Flatten,
    Layer,
    MaxPool2D,
    Reshape,
    SoftmaxOutput,
    layer_from_dict,
)
from .losses import cross_entropy, softmax
from .network import NORMAL, THEFT, Mode, NeuralModel, forward, input_gradient, prob_input_gradient
from .optim import init_state, rmsprop_step
from .training import TrainResult, accuracy, train
from .gradcheck import central_difference, finite_diff_gradient, max_relative_error
from .serialization import load_model, save_model

__all__ = [
    "LSTM",
    "Activation",
    "Conv2D",
    "Dense",
    "Dropout",
    "Flatten",
    "Layer",
    "MaxPool2D",
    "Reshape",
    "SoftmaxOutput",
    "layer_from_dict",
    "cross_entropy",
    "softmax",
    "NORMAL",
    "THEFT",
    "Mode",
    "NeuralModel",
    "forward",
    "input_gradient",
    "prob_input_gradient",
    "init_state",
    "rmsprop_step",
    "TrainResult",
    "accuracy",
    "train",
    "central_difference",
    "finite_diff_gradient",
    "max_relative_error",
    "load_model",
    "save_model",
]
