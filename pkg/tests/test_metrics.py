"""
Tests for classifier metrics.
"""
import numpy as np
import pytest

from meterguard.models.metrics import confusion_counts, evaluate_classifier
from meterguard.nn.layers import SoftmaxOutput
from meterguard.nn.network import NeuralModel
from meterguard.schemas.report import ClassifierMetrics
from meterguard.services.datasets import LabeledDataset
from meterguard.utils.errors import InsufficientDataError


def _threshold_model(bias_theft: float, weight: float = 0.0) -> NeuralModel:
    """Theft logit = bias_theft - weight * sum(x); Normal logit = 0."""
    W = np.zeros((48, 2))
    W[:, 1] = -weight
    return NeuralModel([SoftmaxOutput(2)], [{"W": W, "b": np.array([0.0, bias_theft])}], (48,), model_id="threshold")


def _balanced() -> LabeledDataset:
    profiles = np.r_[np.full((5, 48), 1.0), np.full((5, 48), 0.1)]
    return LabeledDataset(profiles=profiles, labels=[0] * 5 + [1] * 5, provenance="test")


def test_perfect_predictor():
    # sum(x) is 48 for normal rows and 4.8 for theft rows; threshold at 26.4
    model = _threshold_model(bias_theft=26.4, weight=1.0)
    metrics = evaluate_classifier(model, _balanced())
    assert metrics.accuracy == 1.0 and metrics.fpr == 0.0 and metrics.recall == 1.0


def test_always_normal_predictor():
    metrics = evaluate_classifier(_threshold_model(bias_theft=-5.0), _balanced())
    assert (metrics.accuracy, metrics.fpr, metrics.recall) == (0.5, 0.0, 0.0)


def test_ties_count_as_theft():
    metrics = evaluate_classifier(_threshold_model(bias_theft=0.0), _balanced())
    assert metrics.tp == 5 and metrics.fp == 5


def test_metric_identities():
    m = ClassifierMetrics(model_id="m", tp=7, fp=2, tn=9, fn=3)
    assert m.accuracy == (7 + 9) / 21
    assert m.fpr == 2 / 11
    assert m.recall == 7 / 10
    assert m.recall == 1 - 3 / 10


def test_empty_denominators_are_zero():
    m = ClassifierMetrics(model_id="m", tp=0, fp=0, tn=4, fn=0)
    assert m.recall == 0.0 and m.fpr == 0.0


def test_confusion_counts():
    assert confusion_counts(np.array([True, True, False, False]), np.array([1, 0, 0, 1])) == (1, 1, 1, 1)


def test_sharding_does_not_change_counts(fnn_model):
    rng = np.random.default_rng(0)
    data = LabeledDataset(profiles=rng.uniform(0, 2, size=(5000, 48)), labels=rng.integers(0, 2, 5000), provenance="t")
    assert evaluate_classifier(fnn_model, data, jobs=1) == evaluate_classifier(fnn_model, data, jobs=3)


def test_empty_dataset(fnn_model):
    with pytest.raises(InsufficientDataError):
        evaluate_classifier(fnn_model, LabeledDataset(profiles=np.zeros((0, 48)), labels=[], provenance="t"))
