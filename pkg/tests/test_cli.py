"""
Tests for the command-line entry point.
"""
from pathlib import Path

import pytest

from meterguard.cli import build_parser, run_cli


@pytest.fixture
def small_conf(tmp_path) -> Path:
    path = tmp_path / "small.conf"
    path.write_text("holdout_normals=20\ntest_fraction=0.25\n")
    return path


def _data_files(workdir: Path) -> dict[str, bytes]:
    (stage_dir,) = workdir.glob("prepare-data-*")
    return {p.name: p.read_bytes() for p in sorted(stage_dir.glob("*.csv"))}


def test_no_arguments_is_usage_error():
    assert run_cli([]) == 2


def test_unknown_command():
    assert run_cli(["explode"]) == 2


def test_help_exits_cleanly():
    assert run_cli(["--help"]) == 0


def test_attack_flags_parse():
    args = build_parser().parse_args(["attack", "--kind", "fgsm", "--epsilon", "0.1", "--count", "50"])
    assert args.kind == "fgsm" and args.epsilon == 0.1
    assert args.count == 50
    assert args.surrogate == "fnn-attacker"
    assert args.batch_count == 1000


def test_prepare_data_is_reproducible(tmp_path, small_conf):
    argv = ["prepare-data", "--synthetic", "--count", "40", "--seed", "7", "--config", str(small_conf)]
    assert run_cli(argv + ["--workdir", str(tmp_path / "a")]) == 0
    assert run_cli(argv + ["--workdir", str(tmp_path / "b")]) == 0

    first, second = _data_files(tmp_path / "a"), _data_files(tmp_path / "b")
    assert set(first) == {"attacker_test.csv", "attacker_train.csv", "defender_test.csv", "defender_train.csv", "holdout.csv"}
    assert first == second
    # 40 rows per side, a quarter held out for testing
    assert len(first["defender_train.csv"].decode().splitlines()) == 31
    assert len(first["defender_test.csv"].decode().splitlines()) == 11


def test_missing_input_file(tmp_path):
    code = run_cli(["prepare-data", "--data-in", str(tmp_path / "absent.csv"), "--workdir", str(tmp_path / "w")])
    assert code == 1


def test_invalid_grid_flag(tmp_path):
    assert run_cli(["evaluate", "--eps-grid", "0.1,-1", "--workdir", str(tmp_path)]) == 2


def test_raw_requires_input(tmp_path):
    assert run_cli(["prepare-data", "--raw", "--workdir", str(tmp_path)]) == 2
