"""
Tests for the adversarial measurement generators.
"""
import numpy as np
import pytest

from meterguard.nn.layers import SoftmaxOutput
from meterguard.nn.network import NeuralModel
from meterguard.schemas.attack import AttackConfig, AttackKind
from meterguard.services.attacks import (
    clip_nonnegative,
    deepfool_attack,
    deepfool_batch,
    deepfool_step,
    fgsm_attack,
    fgsm_step,
    fgv_attack,
    fgv_step,
    generate_batch,
    init_batch,
    load_batch,
    random_init,
    save_batch,
    ssf_iter_attack,
    ssf_iter_trajectory,
    va1_attack,
    va2_attack,
)
from meterguard.utils.errors import InsufficientDataError, ValidationError, VanishingGradientError


class FixedGradient:
    """Stands in for a model whose Theft-loss input gradient is constant."""

    model_id = "fixed"

    def __init__(self, gradient):
        self.gradient = np.asarray(gradient, dtype=np.float64)

    def input_gradient(self, x, label):
        return np.broadcast_to(self.gradient, np.shape(x)).copy()


class LinearMargin:
    """z_theft - z_normal = w.a + c exactly, for the DeepFool projection."""

    def __init__(self, w, c):
        self.w, self.c = np.asarray(w, dtype=np.float64), float(c)

    def logit_margin(self, a):
        return np.atleast_2d(a) @ self.w + self.c

    def margin_input_gradient(self, a):
        return np.broadcast_to(self.w, np.atleast_2d(a).shape).copy()


def _linear(W, b, model_id="linear") -> NeuralModel:
    return NeuralModel([SoftmaxOutput(2)], [{"W": np.asarray(W, float), "b": np.asarray(b, float)}], (48,), model_id=model_id)


def test_clip():
    assert np.array_equal(clip_nonnegative([-1.0, 0.0, 2.0]), [0.0, 0.0, 2.0])
    v = np.random.default_rng(0).normal(size=100)
    assert np.array_equal(clip_nonnegative(clip_nonnegative(v)), clip_nonnegative(v))
    positive = np.abs(v)
    assert np.array_equal(clip_nonnegative(positive), positive)


def test_random_init_zero_sigma():
    assert np.array_equal(random_init(48, 0.0, np.random.default_rng(1)), np.zeros(48))


def test_random_init_statistics():
    draws = random_init(48 * 100_000, 1e-4, np.random.default_rng(2)).reshape(-1, 48)
    assert abs(np.mean(draws == 0.0) - 0.5) <= 0.01
    expected = 48 * 1e-4 / np.sqrt(2 * np.pi)
    assert draws.sum(axis=1).mean() == pytest.approx(expected, rel=0.01)


def test_init_rows_do_not_depend_on_batch_size():
    assert np.array_equal(init_batch(5, 1e-4, 7)[:3], init_batch(3, 1e-4, 7))


def test_fgsm_sign_step():
    model = FixedGradient([0.5, -0.2, 0.0])
    assert np.allclose(fgsm_step(model, np.ones(3), 0.1), [1.1, 0.9, 1.0])


def test_fgsm_changes_are_zero_or_epsilon(fnn_model):
    a0 = np.random.default_rng(3).uniform(0.5, 1.0, size=(4, 48))
    change = np.abs(fgsm_step(fnn_model, a0, 0.05) - a0)
    assert np.all(np.isclose(change, 0.0) | np.isclose(change, 0.05))


def test_fgv_step_is_epsilon_times_gradient(cnn_model):
    a0 = np.random.default_rng(4).uniform(0.5, 1.0, size=(2, 48))
    expected = 0.3 * cnn_model.input_gradient(a0, 1)
    assert np.allclose(fgv_step(cnn_model, a0, 0.3) - a0, expected, atol=1e-15)


def test_fgv_zero_gradient_only_clips():
    a0 = np.array([-0.5, 0.2, 1.0])
    assert np.array_equal(fgv_attack(FixedGradient(np.zeros(3)), a0, 0.4), [0.0, 0.2, 1.0])


def test_single_step_attacks_reject_bad_epsilon(fnn_model):
    with pytest.raises(ValidationError):
        fgsm_attack(fnn_model, np.zeros(48), 0.0)


def test_deepfool_lands_on_linear_boundary():
    rng = np.random.default_rng(5)
    model = LinearMargin(rng.normal(size=48), 0.3)
    a = rng.uniform(0, 1, size=48)
    stepped = deepfool_step(model, a)
    assert model.w @ stepped + model.c == pytest.approx(0.0, abs=1e-12)


def test_deepfool_leaves_normal_inputs_alone():
    model = _linear(np.zeros((48, 2)), [1.0, 0.0])
    a0 = np.r_[-np.ones(4), np.ones(44)]
    vector, iterations = deepfool_attack(model, a0)
    assert iterations == 0
    assert np.array_equal(vector, clip_nonnegative(a0))


def test_deepfool_success_means_normal():
    rng = np.random.default_rng(6)
    model = _linear(rng.normal(0, 0.3, size=(48, 2)), [-1.0, 2.0])
    result = deepfool_batch(model, init_batch(20, 1e-4, 1), max_iter=100)
    assert np.all(result.vectors >= 0)
    assert result.success.all()
    assert not model.predict_theft(result.vectors[result.success]).any()
    assert np.all(result.iterations <= 100)


def test_deepfool_moves_only_readings_that_can_move():
    """Readings pinned at 0 whose gradient points negative are left out of the step"""
    W = np.zeros((48, 2))
    W[:, 1] = np.r_[np.ones(47), -1.0]
    model = _linear(W, [0.0, 0.5])
    vector, iterations = deepfool_attack(model, np.zeros(48))
    assert iterations == 1
    assert np.array_equal(vector[:47], np.zeros(47))
    assert vector[47] > 0.5
    assert not model.predict_theft(vector)


def test_deepfool_crosses_a_saturated_boundary():
    """A margin of 60 logits still flips to Normal with a small L1 change"""
    rng = np.random.default_rng(8)
    W = np.zeros((48, 2))
    W[:, 0] = np.abs(rng.normal(1.0, 0.2, size=48))
    model = _linear(W, [0.0, 60.0])
    result = deepfool_batch(model, init_batch(10, 1e-4, 2), max_iter=100)
    assert result.success.all()
    assert np.all(result.iterations <= 3)
    assert np.all(result.vectors.sum(axis=1) < 120.0)


def test_deepfool_vanishing_gradient_aborts():
    model = _linear(np.zeros((48, 2)), [0.0, 1.0])
    result = deepfool_batch(model, np.ones((2, 48)))
    assert result.aborted.all()
    with pytest.raises(VanishingGradientError):
        deepfool_attack(model, np.ones(48))


def test_ssf_zero_steps_is_the_initialization():
    a = ssf_iter_attack(FixedGradient(np.ones(48)), step=0, size=0.1, sigma=1e-4, rng=np.random.default_rng(9))
    assert np.array_equal(a, random_init(48, 1e-4, np.random.default_rng(9)))


def test_ssf_steps_have_infinity_norm_size(fnn_model):
    a0 = np.full((3, 48), 5.0)
    trajectory = ssf_iter_trajectory(fnn_model, a0, steps=4, size=0.01)
    for before, after in zip(trajectory.snapshots, trajectory.snapshots[1:]):
        assert np.allclose(np.abs(after - before).max(axis=1), 0.01, rtol=0, atol=1e-12)
    assert np.array_equal(trajectory.evaluations, [4, 4, 4])


def test_ssf_stops_on_flat_gradient():
    model = _linear(np.zeros((48, 2)), [0.0, 1.0])
    a0 = init_batch(2, 1e-4, 3)
    trajectory = ssf_iter_trajectory(model, a0, steps=5, size=0.1)
    assert np.array_equal(trajectory.evaluations, [1, 1])
    assert trajectory.halted.all()
    assert np.array_equal(trajectory.snapshots[-1], a0)


def test_ssf_trajectory_prefix(cnn_model):
    a0 = init_batch(3, 1e-4, 4)
    long = ssf_iter_trajectory(cnn_model, a0, steps=5, size=0.05)
    short = ssf_iter_trajectory(cnn_model, a0, steps=3, size=0.05, keep_snapshots=False)
    assert np.array_equal(long.snapshots[3], short.snapshots[-1])


def test_va1_scaling():
    base = np.random.default_rng(0).uniform(0, 2, size=48)
    assert np.array_equal(va1_attack(base, 1.0), base)
    assert va1_attack(base, 0.5).sum() == pytest.approx(base.sum() / 2, rel=1e-12)
    with pytest.raises(ValidationError):
        va1_attack(base, 0.0)


def test_va2_mean_l1():
    u = 0.8
    draws = va2_attack(48 * 100_000, u, np.random.default_rng(1)).reshape(-1, 48)
    assert draws.sum(axis=1).mean() == pytest.approx(48 * u / 2, rel=0.01)
    assert np.all((draws >= 0) & (draws <= u))
    assert va2_attack(48, 1e-9, np.random.default_rng(2)).max() <= 1e-9


@pytest.mark.parametrize(
    "config",
    [
        AttackConfig.fgsm(0.1, seed=1),
        AttackConfig.fgv(0.5, seed=1),
        AttackConfig.deepfool(20, seed=1),
        AttackConfig.ssf_iter(5, 0.05, seed=1),
        AttackConfig.va2(1.0, seed=1),
        AttackConfig.init_only(seed=1),
    ],
    ids=lambda c: c.kind.value,
)
def test_batches_are_deterministic_and_feasible(fnn_model, config):
    a = generate_batch(config, fnn_model, 6)
    b = generate_batch(config, fnn_model, 6)
    assert a.vectors.shape == (6, 48)
    assert np.all(a.vectors >= 0)
    assert np.array_equal(a.vectors, b.vectors)


def test_va1_batch_needs_a_pool(fnn_model):
    with pytest.raises(InsufficientDataError):
        generate_batch(AttackConfig.va1(0.5), None, 3)
    pool = np.random.default_rng(0).uniform(0, 1, size=(10, 48))
    batch = generate_batch(AttackConfig.va1(0.5, seed=2), None, 4, normal_pool=pool)
    for row in batch.vectors:
        assert any(np.allclose(row, 0.5 * base) for base in pool)


def test_gradient_attacks_need_a_model():
    with pytest.raises(ValidationError):
        generate_batch(AttackConfig.fgsm(0.1), None, 2)


def test_batch_provenance_and_file(fnn_model, tmp_path):
    batch = generate_batch(AttackConfig.ssf_iter(3, 0.1, seed=4), fnn_model, 5)
    assert batch.surrogate_id == fnn_model.model_id
    assert batch.surrogate_hash == fnn_model.fingerprint()
    assert np.array_equal(batch.iterations, [3] * 5)

    loaded = load_batch(save_batch(batch, tmp_path / "batch.csv"))
    assert np.array_equal(loaded.vectors, batch.vectors)
    assert loaded.config == batch.config
    assert loaded.surrogate_hash == batch.surrogate_hash


def test_reloaded_deepfool_batch_keeps_its_aborts(tmp_path):
    model = _linear(np.zeros((48, 2)), [0.0, 1.0])
    batch = generate_batch(AttackConfig.deepfool(10, seed=2), model, 3)
    assert batch.aborted_count == 3

    loaded = load_batch(save_batch(batch, tmp_path / "deepfool.csv"))
    assert loaded.aborted_count == 3
    assert np.array_equal(loaded.aborted, batch.aborted)
    assert np.array_equal(loaded.iterations, batch.iterations)


def test_batches_without_aborts_reload_without_them(fnn_model, tmp_path):
    batch = generate_batch(AttackConfig.fgsm(0.1, seed=1), fnn_model, 2)
    assert load_batch(save_batch(batch, tmp_path / "fgsm.csv")).aborted is None


@pytest.mark.parametrize(
    "kwargs",
    [
        {"kind": AttackKind.FGSM},
        {"kind": AttackKind.FGSM, "epsilon": -1.0},
        {"kind": AttackKind.FGSM, "epsilon": 0.1, "step": 3},
        {"kind": AttackKind.SSF_ITER, "step": 3},
        {"kind": AttackKind.VA1, "alpha": 1.5},
    ],
)
def test_attack_config_requires_exactly_its_fields(kwargs):
    with pytest.raises(ValueError):
        AttackConfig(**kwargs)
