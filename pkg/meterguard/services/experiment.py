"""
Attack experiments: recall and L1 cost over parameter grids.

An ExperimentSpec names a defender, the model whose gradients the attacker
uses (the defender itself in white-box runs, an attacker surrogate in
black-box runs) and a grid of AttackConfigs. Each cell generates N vectors,
scores them against the defender and records one AttackReportRow.

Cells run on a thread pool; rows are merged back in grid order, so reports do
not depend on scheduling. ssf-iter cells that differ only in `step` share one
trajectory: the iterate after s steps is a prefix of the longer run.
"""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Mapping, Optional, Sequence, Union

import numpy as np

from ..nn.network import NeuralModel
from ..schemas.attack import AttackConfig, AttackKind
from ..schemas.report import AttackReportRow, ComparisonSummary, DefenseComparisonRow, ExperimentSpec
from ..utils.errors import (
    AccessViolationError,
    GridMismatchError,
    InsufficientDataError,
    MissingArtifactError,
    WorkbenchError,
)
from .attacks import AdversarialBatch, generate_batch, init_batch, ssf_iter_trajectory

logger = logging.getLogger(__name__)

INIT_ONLY_MIN_RECALL = 0.99


def _vectors(batch: Union[AdversarialBatch, np.ndarray]) -> np.ndarray:
    return batch.vectors if isinstance(batch, AdversarialBatch) else np.atleast_2d(np.asarray(batch, dtype=np.float64))


def measure_recall(defender: NeuralModel, batch: Union[AdversarialBatch, np.ndarray]) -> float:
    """Share of adversarial vectors the defender still flags as Theft (ties are Theft)."""
    vectors = _vectors(batch)
    if len(vectors) == 0:
        raise InsufficientDataError("Cannot measure recall on an empty batch")
    return float(np.mean(defender.predict_theft(vectors)))


def average_l1(batch: Union[AdversarialBatch, np.ndarray]) -> float:
    """Mean over rows of the row sum, in kWh."""
    vectors = _vectors(batch)
    if len(vectors) == 0:
        raise InsufficientDataError("Cannot average an empty batch")
    return float(vectors.sum(axis=1).mean())


def ssf_grid(step_max: int, sizes: Sequence[float], sigma: float = 1e-4, seed: int = 0) -> list[AttackConfig]:
    """(step, size) cells, size-major, steps 1..step_max."""
    return [AttackConfig.ssf_iter(step, size, sigma=sigma, seed=seed) for size in sizes for step in range(1, step_max + 1)]


def _row(spec: ExperimentSpec, config: AttackConfig, defender: NeuralModel, batch: AdversarialBatch) -> AttackReportRow:
    return AttackReportRow.from_cell(
        spec,
        config,
        recall=measure_recall(defender, batch),
        avg_l1=average_l1(batch),
        n=len(batch),
        mean_iterations=batch.mean_iterations,
        aborted=batch.aborted_count,
    )


def _ssf_job(
    spec: ExperimentSpec,
    cells: list[tuple[int, AttackConfig]],
    defender: NeuralModel,
    surrogate: NeuralModel,
) -> list[tuple[int, AttackReportRow]]:
    """One trajectory serves every step of a (size, sigma, seed) group."""
    first = cells[0][1]
    longest = max(cfg.step for _, cfg in cells)
    a0 = init_batch(spec.vectors_per_cell, first.sigma, first.seed)
    trajectory = ssf_iter_trajectory(surrogate, a0, longest, first.size)
    out = []
    for index, cfg in cells:
        batch = AdversarialBatch(
            vectors=trajectory.snapshots[cfg.step],
            config=cfg,
            surrogate_id=surrogate.model_id,
            iterations=np.minimum(trajectory.evaluations, cfg.step),
        )
        out.append((index, _row(spec, cfg, defender, batch)))
    return out


def _single_job(
    spec: ExperimentSpec,
    index: int,
    config: AttackConfig,
    defender: NeuralModel,
    surrogate: NeuralModel,
    normal_pool: Optional[np.ndarray],
) -> list[tuple[int, AttackReportRow]]:
    batch = generate_batch(config, surrogate, spec.vectors_per_cell, normal_pool)
    return [(index, _row(spec, config, defender, batch))]


def run_experiment(
    spec: ExperimentSpec,
    registry: Mapping[str, NeuralModel],
    normal_pool: Optional[np.ndarray] = None,
    jobs: int = 1,
    preflight: bool = True,
) -> list[AttackReportRow]:
    """
    Run every cell of an experiment.

    Args:
        spec: Defender, surrogate, grid, vectors per cell and seed
        registry: Model id -> trained model
        normal_pool: Genuine profiles for VA1 base draws
        jobs: Worker threads
        preflight: Prepend an init-only row (random_init vectors scored by the defender)

    Returns:
        Rows in grid order, preceded by the init-only row when the grid is nonempty

    Raises:
        MissingArtifactError: Defender or surrogate not in the registry
        AccessViolationError: A black-box run queried defender gradients
        WorkbenchError: A cell failed (the message names the cell)
    """
    if not spec.grid:
        return []
    for model_id in (spec.defender_id, spec.surrogate_id):
        if model_id not in registry:
            raise MissingArtifactError("Model", model_id)
    defender = registry[spec.defender_id]
    surrogate = registry[spec.surrogate_id]
    black_box = spec.surrogate_id != spec.defender_id
    _, gradient_calls_before = defender.audit.snapshot()

    grid = list(spec.grid)
    if preflight:
        sigma = next((cfg.sigma for cfg in grid if cfg.kind is not AttackKind.VA1 and cfg.kind is not AttackKind.VA2), 1e-4)
        grid.insert(0, AttackConfig.init_only(sigma=sigma, seed=spec.seed))

    ssf_groups: dict[tuple, list[tuple[int, AttackConfig]]] = {}
    tasks = []
    for index, cfg in enumerate(grid):
        if cfg.kind is AttackKind.SSF_ITER:
            ssf_groups.setdefault((cfg.size, cfg.sigma, cfg.seed), []).append((index, cfg))
        else:
            tasks.append((_single_job, (spec, index, cfg, defender, surrogate, normal_pool), [cfg]))
    for cells in ssf_groups.values():
        tasks.append((_ssf_job, (spec, cells, defender, surrogate), [cfg for _, cfg in cells]))

    def _run(task) -> list[tuple[int, AttackReportRow]]:
        fn, args, configs = task
        try:
            return fn(*args)
        except Exception as e:
            cells = ", ".join(cfg.label() for cfg in configs[:3]) + (" ..." if len(configs) > 3 else "")
            code = e.exit_code if isinstance(e, WorkbenchError) else 1
            raise WorkbenchError(f"{spec.name}: cell {cells} failed: {e}", exit_code=code) from e

    logger.info(f"🎯 {spec.name}: {len(spec.grid)} cells × {spec.vectors_per_cell} vectors ({spec.setting.value}-box)")
    if jobs > 1 and len(tasks) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run, tasks))
    else:
        results = [_run(task) for task in tasks]

    indexed = sorted((pair for part in results for pair in part), key=lambda pair: pair[0])
    rows = [row for _, row in indexed]

    if black_box:
        _, gradient_calls_after = defender.audit.snapshot()
        if gradient_calls_after != gradient_calls_before:
            raise AccessViolationError(
                f"{spec.name}: black-box run made {gradient_calls_after - gradient_calls_before} "
                f"gradient queries against defender {spec.defender_id}"
            )

    if preflight:
        init_recall = rows[0].recall
        if init_recall < INIT_ONLY_MIN_RECALL:
            logger.warning(f"⚠️ {spec.name}: init-only recall {init_recall:.3f} below {INIT_ONLY_MIN_RECALL}")
    logger.info(f"✅ {spec.name}: {len(rows)} rows")
    return rows


def best_cell(
    rows: Sequence[AttackReportRow],
    max_l1_fraction: float,
    kind: Optional[AttackKind] = None,
) -> Optional[AttackReportRow]:
    """
    Highest-bypass row whose L1 fraction fits the budget.

    Ties go to the lower average L1, then to the earlier row. Meant for rows
    where the attacker scored its own surrogate, so the choice never involves
    the defender.
    """
    candidates = [
        (i, row) for i, row in enumerate(rows)
        if row.l1_fraction <= max_l1_fraction and (kind is None or row.attack is kind)
    ]
    if not candidates:
        return None
    return min(candidates, key=lambda pair: (-pair[1].bypass, pair[1].avg_l1, pair[0]))[1]


def compare_defenses(
    plain: Sequence[AttackReportRow],
    distilled: Sequence[AttackReportRow],
) -> tuple[list[DefenseComparisonRow], ComparisonSummary]:
    """
    Cell-by-cell deltas (distilled minus plain) of bypass rate and average L1.

    Raises:
        GridMismatchError: The two reports were not run on the same grid
    """
    if [r.grid_key() for r in plain] != [r.grid_key() for r in distilled]:
        raise GridMismatchError(f"Reports do not share a grid ({len(plain)} vs {len(distilled)} cells)")

    rows = []
    reduced = unchanged = increased = 0
    for p, d in zip(plain, distilled):
        delta = d.bypass - p.bypass
        if delta < 0:
            reduced += 1
        elif delta > 0:
            increased += 1
        else:
            unchanged += 1
        rows.append(DefenseComparisonRow(
            attack=p.attack,
            epsilon=p.epsilon,
            step=p.step,
            size=p.size,
            plain_defender=p.defender,
            distilled_defender=d.defender,
            plain_bypass=p.bypass,
            distilled_bypass=d.bypass,
            delta_bypass=delta,
            plain_avg_l1=p.avg_l1,
            distilled_avg_l1=d.avg_l1,
            delta_avg_l1=d.avg_l1 - p.avg_l1,
        ))
    summary = ComparisonSummary(cells=len(rows), reduced=reduced, unchanged=unchanged, increased=increased)
    logger.info(f"🛡️ Distillation: bypass reduced in {reduced}/{len(rows)} cells, increased in {increased}")
    return rows, summary
