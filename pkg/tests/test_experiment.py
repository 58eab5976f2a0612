"""
Tests for the sweep runner, calibration helper and defense comparison.
"""
import numpy as np
import pytest

from meterguard.nn.layers import SoftmaxOutput
from meterguard.nn.network import NeuralModel
from meterguard.schemas.attack import AttackConfig, AttackKind
from meterguard.schemas.report import AttackReportRow, ExperimentSpec, Setting
from meterguard.services.attacks import generate_batch
from meterguard.services.experiment import (
    average_l1,
    best_cell,
    compare_defenses,
    measure_recall,
    run_experiment,
    ssf_grid,
)
from meterguard.utils.errors import (
    AccessViolationError,
    GridMismatchError,
    InsufficientDataError,
    MissingArtifactError,
    WorkbenchError,
)
from tests.helpers import tiny_cnn, tiny_fnn


def _sum_threshold(threshold: float) -> NeuralModel:
    """Theft when sum(x) <= threshold."""
    W = np.zeros((48, 2))
    W[:, 0] = 1.0
    return NeuralModel([SoftmaxOutput(2)], [{"W": W, "b": np.array([0.0, threshold])}], (48,), model_id="sum")


def _spec(defender="d", surrogate="d", grid=(), **kwargs) -> ExperimentSpec:
    return ExperimentSpec(
        name="test", defender_id=defender, surrogate_id=surrogate, grid=list(grid),
        vectors_per_cell=kwargs.pop("n", 8), normal_mean_l1=32.05, seed=3, **kwargs,
    )


@pytest.fixture
def registry():
    return {"d": tiny_fnn(seed=1, model_id="d"), "s": tiny_cnn(seed=2, model_id="s")}


def test_recall_counts_theft_rows():
    model = _sum_threshold(10.0)
    vectors = np.r_[np.zeros((3, 48)), np.ones((1, 48))]
    assert measure_recall(model, vectors) == 0.75
    assert measure_recall(model, np.zeros((2, 48))) == 1.0
    assert measure_recall(model, np.ones((2, 48))) == 0.0


def test_average_l1():
    assert average_l1(np.ones((2, 48))) == 48.0
    assert average_l1(np.zeros((4, 48))) == 0.0
    with pytest.raises(InsufficientDataError):
        average_l1(np.zeros((0, 48)))


def test_empty_grid_gives_empty_report(registry):
    assert run_experiment(_spec(), registry) == []


def test_rows_follow_grid_order_after_preflight(registry):
    grid = [AttackConfig.fgsm(e, seed=3) for e in (0.3, 0.01, 0.1)]
    rows = run_experiment(_spec(grid=grid), registry)
    assert [r.attack for r in rows] == [AttackKind.INIT_ONLY] + [AttackKind.FGSM] * 3
    assert [r.epsilon for r in rows[1:]] == [0.3, 0.01, 0.1]
    for row in rows:
        assert row.bypass == 1.0 - row.recall
        assert row.l1_fraction == row.avg_l1 / 32.05
        assert row.setting is Setting.WHITE and row.n == 8


def test_shared_ssf_trajectory_matches_single_cells(registry):
    grid = ssf_grid(step_max=4, sizes=[0.05, 0.2], seed=3)
    rows = run_experiment(_spec(grid=grid), registry, preflight=False)
    assert [(r.step, r.size) for r in rows] == [(s, z) for z in (0.05, 0.2) for s in range(1, 5)]
    for config, row in zip(grid, rows):
        batch = generate_batch(config, registry["d"], 8)
        assert row.recall == measure_recall(registry["d"], batch)
        assert row.avg_l1 == average_l1(batch)
        assert row.mean_iterations == batch.mean_iterations


def test_worker_count_does_not_change_rows(registry):
    grid = [AttackConfig.fgv(0.2, seed=3), AttackConfig.deepfool(10, seed=3)] + ssf_grid(3, [0.1, 0.3], seed=3)
    serial = run_experiment(_spec(grid=grid), registry, jobs=1)
    parallel = run_experiment(_spec(grid=grid), registry, jobs=4)
    assert serial == parallel


def test_black_box_never_queries_defender_gradients(registry):
    grid = [AttackConfig.fgsm(0.1, seed=3)] + ssf_grid(2, [0.1], seed=3)
    before = registry["d"].audit.snapshot()[1]
    rows = run_experiment(_spec(defender="d", surrogate="s", grid=grid), registry)
    assert registry["d"].audit.snapshot()[1] == before
    assert all(r.setting is Setting.BLACK and r.surrogate == "s" for r in rows)


def test_gradient_leak_is_reported():
    shared = tiny_fnn(seed=1)
    registry = {"d": shared, "s": shared}
    with pytest.raises(AccessViolationError):
        run_experiment(_spec(defender="d", surrogate="s", grid=[AttackConfig.fgsm(0.1)]), registry)


def test_missing_model(registry):
    with pytest.raises(MissingArtifactError):
        run_experiment(_spec(defender="nope", grid=[AttackConfig.fgsm(0.1)]), registry)


def test_failed_cell_is_named(registry):
    with pytest.raises(WorkbenchError, match=r"va1\(alpha=0.5\)"):
        run_experiment(_spec(grid=[AttackConfig.va1(0.5)]), registry)


def _row(bypass: float, avg_l1: float, step: int = 1, size: float = 0.1, defender: str = "d") -> AttackReportRow:
    spec = _spec(defender=defender, surrogate="s")
    return AttackReportRow.from_cell(spec, AttackConfig.ssf_iter(step, size, seed=3), recall=1.0 - bypass, avg_l1=avg_l1, n=8)


def test_best_cell_respects_the_budget():
    rows = [_row(0.9, 10.0, step=1), _row(0.7, 2.0, step=2), _row(0.7, 1.0, step=3), _row(0.2, 0.5, step=4)]
    best = best_cell(rows, max_l1_fraction=0.1)
    assert best.step == 3
    assert best_cell(rows, max_l1_fraction=0.001) is None


def test_compare_defenses_counts_cells():
    plain = [_row(0.5, 1.0, step=1), _row(0.5, 1.0, step=2), _row(0.5, 1.0, step=3)]
    distilled = [_row(0.25, 1.0, step=1, defender="dd"), _row(0.5, 1.0, step=2, defender="dd"), _row(0.75, 2.0, step=3, defender="dd")]
    rows, summary = compare_defenses(plain, distilled)
    assert (summary.reduced, summary.unchanged, summary.increased) == (1, 1, 1)
    assert summary.not_worse_fraction == pytest.approx(2 / 3)
    assert rows[0].delta_bypass == -0.25
    assert rows[2].delta_avg_l1 == 1.0


def test_compare_defenses_needs_the_same_grid():
    with pytest.raises(GridMismatchError):
        compare_defenses([_row(0.5, 1.0, step=1)], [_row(0.5, 1.0, step=2)])
