"""
Tests for temperature softmax and cross-entropy.
"""
import numpy as np
import pytest

from meterguard.nn.losses import cross_entropy, softmax, softmax_cross_entropy_grad
from meterguard.utils.errors import ShapeMismatchError, ValidationError


def test_perfect_prediction_has_zero_loss():
    assert cross_entropy(np.array([[1.0, 0.0]]), np.array([[1.0, 0.0]])) == pytest.approx(0.0, abs=1e-11)


def test_uniform_prediction_costs_ln2():
    assert cross_entropy(np.array([[0.5, 0.5]]), np.array([[0.0, 1.0]])) == pytest.approx(0.693147, abs=1e-6)


def test_batch_loss_is_the_row_mean():
    probs = np.array([[1.0, 0.0], [0.5, 0.5]])
    labels = np.array([[1.0, 0.0], [0.0, 1.0]])
    assert cross_entropy(probs, labels) == pytest.approx(0.346574, abs=1e-6)


def test_zero_probability_is_floored():
    loss = cross_entropy(np.array([[1.0, 0.0]]), np.array([[0.0, 1.0]]))
    assert np.isfinite(loss)
    assert loss == pytest.approx(-np.log(1e-12))


def test_label_shape_must_match():
    with pytest.raises(ShapeMismatchError):
        cross_entropy(np.array([[0.5, 0.5]]), np.array([[1.0, 0.0, 0.0]]))


def test_softmax_at_high_temperature():
    """logits (1, 0) at T=100"""
    assert np.allclose(softmax(np.array([1.0, 0.0]), 100.0), [0.50250, 0.49750], atol=1e-5)


def test_temperature_softmax_is_softmax_of_scaled_logits():
    z = np.random.default_rng(0).normal(0, 5, size=(6, 2))
    assert np.array_equal(softmax(z, 7.0), softmax(z / 7.0))
    assert np.array_equal(softmax(z, 1.0), softmax(z))


def test_softmax_survives_huge_logits():
    probs = softmax(np.array([[1e4, -1e4], [800.0, 799.0]]))
    assert np.all(np.isfinite(probs))
    assert np.allclose(probs.sum(axis=1), 1.0)


def test_softmax_rejects_nonpositive_temperature():
    with pytest.raises(ValidationError):
        softmax(np.zeros(2), 0.0)


def test_cross_entropy_gradient_scales_with_temperature():
    probs = np.array([[0.3, 0.7]])
    labels = np.array([[1.0, 0.0]])
    assert np.allclose(softmax_cross_entropy_grad(probs, labels, 10.0), [[-0.07, 0.07]])
