"""
Tests for dataset assembly, splitting and CSV persistence.
"""
import numpy as np
import pytest

from meterguard.services.datasets import (
    LabeledDataset,
    build_labeled_dataset,
    load_dataset,
    load_profiles,
    parse_scenario_mix,
    save_dataset,
    save_profiles,
    split_dataset,
    split_pools,
)
from meterguard.services.readings import profiles_matrix
from meterguard.services.theft import TheftKind
from meterguard.utils.errors import InsufficientDataError, ValidationError


def test_label_counts_follow_the_fraction(genuine_profiles):
    data = build_labeled_dataset(genuine_profiles, 180, polluted_fraction=0.5, seed=1)
    assert data.theft_count == 90 and data.normal_count == 90
    assert data.one_hot.shape == (180, 2)
    assert np.all(data.one_hot.sum(axis=1) == 1.0)


def test_fraction_rounds_half_up(genuine_profiles):
    data = build_labeled_dataset(genuine_profiles, 5, polluted_fraction=0.5, seed=1)
    assert data.theft_count == 3


def test_zero_fraction_is_all_normal(genuine_profiles):
    data = build_labeled_dataset(genuine_profiles, 40, polluted_fraction=0.0, seed=2)
    assert data.theft_count == 0
    source = {tuple(row) for row in profiles_matrix(genuine_profiles)}
    assert all(tuple(row) in source for row in data.profiles)


def test_full_pollution_with_reversal_only(genuine_profiles):
    data = build_labeled_dataset(genuine_profiles, 30, polluted_fraction=1.0, scenario_mix={"h6": 1.0}, seed=3)
    assert data.theft_count == 30
    source = {tuple(row[::-1]) for row in profiles_matrix(genuine_profiles)}
    for row in data.profiles:
        assert tuple(row) in source


def test_same_seed_same_dataset(genuine_profiles):
    a = build_labeled_dataset(genuine_profiles, 60, seed=4)
    b = build_labeled_dataset(genuine_profiles, 60, seed=4)
    assert np.array_equal(a.profiles, b.profiles)
    assert np.array_equal(a.labels, b.labels)
    assert a.scenarios == b.scenarios


def test_pool_too_small(genuine_profiles):
    with pytest.raises(InsufficientDataError):
        build_labeled_dataset(genuine_profiles, len(genuine_profiles) + 1)


def test_scenario_mix_parsing():
    uniform = parse_scenario_mix(None)
    assert uniform[TheftKind.H3] == pytest.approx(1 / 6)
    assert parse_scenario_mix("h1:1,h6:3") == {TheftKind.H1: 0.25, TheftKind.H6: 0.75}
    with pytest.raises(ValidationError):
        parse_scenario_mix("h9:1")


def test_split_ten_rows():
    data = LabeledDataset(profiles=np.arange(480.0).reshape(10, 48), labels=[0, 1] * 5, provenance="test")
    train, test = split_dataset(data, 0.2, seed=1)
    assert (len(train), len(test)) == (8, 2)
    rows = {tuple(r) for r in train.profiles} | {tuple(r) for r in test.profiles}
    assert rows == {tuple(r) for r in data.profiles}
    assert train.theft_count + test.theft_count == data.theft_count
    again_train, _ = split_dataset(data, 0.2, seed=1)
    assert np.array_equal(again_train.profiles, train.profiles)


def test_pools_are_disjoint_by_meter(genuine_profiles):
    pools = split_pools(genuine_profiles, holdout_normals=50, seed=0)
    meters = [{p.meter_id for p in pool} for pool in (pools.defender, pools.attacker, pools.holdout)]
    assert not (meters[0] & meters[1]) and not (meters[0] & meters[2]) and not (meters[1] & meters[2])
    assert len(pools.holdout) >= 50
    assert len(pools.defender) + len(pools.attacker) + len(pools.holdout) == len(genuine_profiles)


def test_dataset_csv_keeps_values_exactly(genuine_profiles, tmp_path):
    data = build_labeled_dataset(genuine_profiles, 20, seed=5, provenance="attacker")
    path = save_dataset(data, tmp_path / "attacker.csv")
    loaded = load_dataset(path)
    assert np.array_equal(loaded.profiles, data.profiles)
    assert np.array_equal(loaded.labels, data.labels)
    assert loaded.provenance == "attacker"
    assert loaded.metadata["theft"] == data.theft_count
    header = path.read_text().splitlines()[0].split(",")
    assert header[0] == "r01" and header[-1] == "label"


def test_dataset_files_are_deterministic(genuine_profiles, tmp_path):
    for name in ("a", "b"):
        save_dataset(build_labeled_dataset(genuine_profiles, 20, seed=6), tmp_path / f"{name}.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_profile_csv(genuine_profiles, tmp_path):
    loaded = load_profiles(save_profiles(genuine_profiles[:7], tmp_path / "holdout.csv"))
    assert [(p.meter_id, p.day) for p in loaded] == [(p.meter_id, p.day) for p in genuine_profiles[:7]]
    assert np.array_equal(profiles_matrix(loaded), profiles_matrix(genuine_profiles[:7]))
