"""
Small models and datasets shared by the test modules.
"""
import numpy as np

from meterguard.nn.layers import LSTM, Conv2D, Dense, Dropout, Flatten, MaxPool2D, Reshape, SoftmaxOutput
from meterguard.nn.network import NeuralModel
from meterguard.services.datasets import LabeledDataset


def tiny_fnn(seed: int = 0, model_id: str = "tiny-fnn") -> NeuralModel:
    layers = [Dense(12), Dense(8), Dropout(0.25), SoftmaxOutput(2)]
    return NeuralModel.build(layers, (48,), seed=seed, model_id=model_id)


def tiny_cnn(seed: int = 0, model_id: str = "tiny-cnn") -> NeuralModel:
    layers = [Reshape((6, 8, 1)), Conv2D(3), Conv2D(4), MaxPool2D(2), Dropout(0.25), Flatten(), Dense(6), SoftmaxOutput(2)]
    return NeuralModel.build(layers, (48,), seed=seed, model_id=model_id)


def tiny_rnn(seed: int = 0, length: int = 6, model_id: str = "tiny-rnn") -> NeuralModel:
    layers = [Reshape((length, 1)), LSTM(5, return_sequences=True), Dropout(0.25), LSTM(4), SoftmaxOutput(2)]
    return NeuralModel.build(layers, (length,), seed=seed, model_id=model_id)


def blob_dataset(n: int = 200, seed: int = 0, gap: float = 1.5) -> LabeledDataset:
    """Two Gaussian blobs in 48-D: Normal around 2.0, Theft around 2.0 - gap."""
    rng = np.random.default_rng(seed)
    labels = np.arange(n) % 2
    centers = np.where(labels[:, None] == 1, 2.0 - gap, 2.0)
    profiles = np.abs(centers + rng.normal(0.0, 0.2, size=(n, 48)))
    return LabeledDataset(profiles=profiles, labels=labels, provenance="test")
