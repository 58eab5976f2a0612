"""
Property tests for the h1-h6 theft scenarios.
"""
import numpy as np
import pytest

from meterguard.services.readings import DailyProfile
from meterguard.services.theft import (
    TheftKind,
    TheftScenario,
    apply_theft_scenario,
    apply_to_readings,
    sample_scenario,
)
from meterguard.utils.errors import InvalidScenarioError


@pytest.fixture
def day():
    return np.random.default_rng(0).uniform(0.05, 2.0, size=48)


def test_h1_scales_by_alpha():
    m = np.arange(2.0, 98.0, 2.0)
    out = apply_to_readings(m, TheftScenario(TheftKind.H1, alpha=0.5), np.random.default_rng(0))
    assert np.array_equal(out, np.arange(1.0, 49.0))


def test_h4_flattens_to_the_mean():
    m = np.r_[np.full(24, 1.0), np.full(24, 3.0)]
    out = apply_to_readings(m, TheftScenario(TheftKind.H4), np.random.default_rng(0))
    assert np.allclose(out, 2.0)


def test_h6_is_an_involution(day):
    rng = np.random.default_rng(1)
    once = apply_to_readings(day, TheftScenario(TheftKind.H6), rng)
    assert np.array_equal(apply_to_readings(once, TheftScenario(TheftKind.H6), rng), day)
    assert once.sum() == pytest.approx(day.sum(), rel=0, abs=1e-12)
    assert once[0] == day[47]


def test_h3_zeroes_only_the_window(day):
    out = apply_to_readings(day, TheftScenario(TheftKind.H3, interval=(10, 20)), np.random.default_rng(0))
    assert np.all(out[9:20] == 0.0)
    assert np.array_equal(out[:9], day[:9])
    assert np.array_equal(out[20:], day[20:])


@pytest.mark.parametrize("seed", range(20))
def test_scaling_scenarios_respect_the_upper_bound(day, seed):
    rng = np.random.default_rng(seed)
    bound = 0.8 * np.maximum(day, day.mean()) + 1e-12
    for kind in (TheftKind.H1, TheftKind.H2, TheftKind.H5):
        out = apply_to_readings(day, TheftScenario(kind), rng)
        assert np.all(out <= bound)
        assert np.all(out >= 0)


def test_h4_preserves_the_total(day):
    out = apply_to_readings(day, TheftScenario(TheftKind.H4), np.random.default_rng(0))
    assert out.sum() == pytest.approx(48 * day.mean(), rel=1e-9)


def test_h5_is_a_scaled_mean(day):
    out = apply_to_readings(day, TheftScenario(TheftKind.H5), np.random.default_rng(3))
    ratio = out / day.mean()
    assert np.all((ratio >= 0.1) & (ratio <= 0.8))


@pytest.mark.parametrize("seed", range(50))
def test_h3_sampled_windows_are_legal(seed):
    scenario = sample_scenario(TheftKind.H3, np.random.default_rng(seed))
    t_i, t_f = scenario.interval
    assert 1 <= t_i <= 42
    assert t_f - t_i + 1 >= 6
    assert t_f <= 48


def test_h1_alpha_range():
    rng = np.random.default_rng(5)
    alphas = [sample_scenario(TheftKind.H1, rng).alpha for _ in range(200)]
    assert min(alphas) >= 0.1 and max(alphas) <= 0.8


@pytest.mark.parametrize(
    "kwargs",
    [{"kind": "h7"}, {"kind": "h1", "alpha": 0.0}, {"kind": "h3", "interval": (0, 5)}, {"kind": "h3", "interval": (10, 5)}],
)
def test_invalid_scenarios_rejected(kwargs):
    with pytest.raises(InvalidScenarioError):
        TheftScenario(**kwargs)


def test_profile_wrapper_keeps_identity(day):
    profile = DailyProfile(meter_id=42, day=7, readings=day)
    stolen = apply_theft_scenario(profile, TheftScenario(TheftKind.H6), np.random.default_rng(0))
    assert (stolen.meter_id, stolen.day) == (42, 7)
    assert np.array_equal(stolen.readings, day[::-1])
