"""
Tests for the synthetic genuine-profile generator.
"""
import numpy as np

from meterguard.services.readings import mean_l1, profiles_matrix
from meterguard.services.synthetic import synthesize_normal_profiles


def test_zero_count():
    assert synthesize_normal_profiles(0, seed=1) == []


def test_same_seed_same_profiles():
    a = profiles_matrix(synthesize_normal_profiles(50, seed=4))
    b = profiles_matrix(synthesize_normal_profiles(50, seed=4))
    c = profiles_matrix(synthesize_normal_profiles(50, seed=5))
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_mean_l1_near_target():
    """10,000 profiles average within 20% of the configured target"""
    profiles = synthesize_normal_profiles(10_000, seed=2, target_mean_l1=32.05)
    assert abs(mean_l1(profiles) - 32.05) <= 0.2 * 32.05


def test_profiles_are_valid_and_grouped_by_meter():
    profiles = synthesize_normal_profiles(23, seed=3, days_per_meter=5)
    matrix = profiles_matrix(profiles)
    assert matrix.shape == (23, 48)
    assert np.all(matrix >= 0) and np.all(np.isfinite(matrix))
    assert len({p.meter_id for p in profiles}) == 5
    assert [p.day for p in profiles[:6]] == [0, 1, 2, 3, 4, 0]


def test_evening_peak_is_visible():
    matrix = profiles_matrix(synthesize_normal_profiles(500, seed=6))
    mean_shape = matrix.mean(axis=0)
    assert mean_shape[34:42].mean() > mean_shape[0:8].mean()
