"""
Adversarial measurement generators.

Every generator emits nonnegative 48-reading vectors meant to be classified
Normal while billing as little energy as possible. Gradient attacks query only
the model they are given (the defender in white-box runs, the attacker's own
surrogate in black-box runs) and always in infer mode.

All batch functions work on (N, 48) arrays. Row i of a seeded batch draws from
its own generator derive_rng(seed, i), so a row never depends on N.

Usage:
    config = AttackConfig.ssf_iter(step=10, size=0.05, seed=7)
    batch = generate_batch(config, surrogate, count=1000)
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

import numpy as np
import pandas as pd

from ..nn.network import THEFT, NeuralModel
from ..schemas.attack import AttackConfig, AttackKind
from ..utils.common import READINGS_PER_DAY, atomic_write, derive_rng, write_json
from ..utils.errors import InsufficientDataError, MissingArtifactError, ValidationError, VanishingGradientError
from .datasets import READING_COLUMNS

logger = logging.getLogger(__name__)

# Gradients with max |G| or ||G||_2 below this are treated as vanished
GRADIENT_FLOOR = 1e-12


@dataclass(frozen=True)
class AdversarialBatch:
    """Attack output with provenance."""

    vectors: np.ndarray
    config: AttackConfig
    surrogate_id: str
    surrogate_hash: str = ""
    iterations: Optional[np.ndarray] = None
    aborted: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        vectors = np.asarray(self.vectors, dtype=np.float64)
        if vectors.ndim != 2 or vectors.shape[1] != READINGS_PER_DAY:
            raise ValidationError(f"Adversarial vectors must be (N, {READINGS_PER_DAY}), got {vectors.shape}")
        if np.any(vectors < 0) or not np.all(np.isfinite(vectors)):
            raise ValidationError("Adversarial vectors must be finite and nonnegative")
        object.__setattr__(self, "vectors", vectors)

    def __len__(self) -> int:
        return len(self.vectors)

    @property
    def aborted_count(self) -> int:
        return int(np.sum(self.aborted)) if self.aborted is not None else 0

    @property
    def mean_iterations(self) -> Optional[float]:
        return float(np.mean(self.iterations)) if self.iterations is not None and len(self.iterations) else None


# ----------------------------------------------------------------------
# Building blocks
# ----------------------------------------------------------------------


def clip_nonnegative(v: np.ndarray) -> np.ndarray:
    """Elementwise max(v, 0)."""
    return np.maximum(np.asarray(v, dtype=np.float64), 0.0)


def random_init(n: int = READINGS_PER_DAY, sigma: float = 1e-4, rng: Optional[np.random.Generator] = None) -> np.ndarray:
    """n i.i.d. N(0, sigma^2) draws clipped at zero."""
    if sigma < 0:
        raise ValidationError(f"sigma must be >= 0, got {sigma}")
    rng = rng if rng is not None else np.random.default_rng()
    return clip_nonnegative(rng.normal(0.0, sigma, size=n))


def init_batch(count: int, sigma: float, seed: int) -> np.ndarray:
    """(count, 48) random_init rows, row i drawn from derive_rng(seed, i)."""
    if count == 0:
        return np.zeros((0, READINGS_PER_DAY))
    return np.stack([random_init(READINGS_PER_DAY, sigma, derive_rng(seed, i)) for i in range(count)])


def _theft_gradient(model: NeuralModel, a: np.ndarray) -> np.ndarray:
    return model.input_gradient(a, THEFT)


# ----------------------------------------------------------------------
# Single-step attacks
# ----------------------------------------------------------------------


def fgsm_step(model: NeuralModel, a: np.ndarray, epsilon: float) -> np.ndarray:
    """a + eps * sign(dL(f(a), Theft)/da), before clipping. sign(0) = 0."""
    return np.asarray(a, dtype=np.float64) + epsilon * np.sign(_theft_gradient(model, a))


def fgsm_attack(model: NeuralModel, a0: np.ndarray, epsilon: float) -> np.ndarray:
    if epsilon <= 0:
        raise ValidationError(f"epsilon must be positive, got {epsilon}")
    return clip_nonnegative(fgsm_step(model, a0, epsilon))


def fgv_step(model: NeuralModel, a: np.ndarray, epsilon: float) -> np.ndarray:
    """a + eps * dL(f(a), Theft)/da, before clipping."""
    return np.asarray(a, dtype=np.float64) + epsilon * _theft_gradient(model, a)


def fgv_attack(model: NeuralModel, a0: np.ndarray, epsilon: float) -> np.ndarray:
    if epsilon <= 0:
        raise ValidationError(f"epsilon must be positive, got {epsilon}")
    return clip_nonnegative(fgv_step(model, a0, epsilon))


# ----------------------------------------------------------------------
# DeepFool
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class DeepFoolResult:
    vectors: np.ndarray
    iterations: np.ndarray
    success: np.ndarray
    aborted: np.ndarray


# Each projection is stretched by this factor so the iterate crosses the boundary
OVERSHOOT = 0.02
# Added to the margin so rows sitting exactly on the boundary still move
MARGIN_SLACK = 1e-4


def _margin(model: NeuralModel, a: np.ndarray) -> np.ndarray:
    """g(a) = z_theft - z_normal per row; same sign as p_theft - p_normal."""
    return np.atleast_1d(model.logit_margin(a))


def _margin_gradient(model: NeuralModel, a: np.ndarray) -> np.ndarray:
    return np.atleast_2d(model.margin_input_gradient(a))


def _free_directions(a: np.ndarray, grad: np.ndarray) -> np.ndarray:
    """Zero the gradient on readings already at 0 that the step would push negative."""
    return np.where((a <= 0.0) & (grad > 0.0), 0.0, grad)


def deepfool_step(model: NeuralModel, a: np.ndarray) -> np.ndarray:
    """One projection a - g(a) / ||grad g||^2 * grad g, before clipping."""
    batch = np.atleast_2d(np.asarray(a, dtype=np.float64))
    g = _margin(model, batch)
    grad = _margin_gradient(model, batch)
    norm2 = np.sum(grad * grad, axis=1)
    if np.any(np.sqrt(norm2) < GRADIENT_FLOOR):
        raise VanishingGradientError(float(np.sqrt(norm2.min())), 0)
    out = batch - (g / norm2)[:, None] * grad
    return out[0] if np.ndim(a) == 1 else out


def deepfool_batch(model: NeuralModel, a0: np.ndarray, max_iter: int = 100) -> DeepFoolResult:
    """
    Iterate the DeepFool projection row by row until each row is Normal.

    The projection runs on the logit margin, whose zero set is the decision
    boundary, and is stretched by OVERSHOOT. Readings pinned at 0 drop out of
    the step direction so clipping cannot undo it. Rows already Normal take 0
    iterations. Rows whose remaining gradient vanishes are marked aborted and
    keep their last iterate.
    """
    if max_iter < 1:
        raise ValidationError(f"max_iter must be >= 1, got {max_iter}")
    a = clip_nonnegative(np.atleast_2d(a0)).copy()
    n = len(a)
    iterations = np.zeros(n, dtype=np.int64)
    aborted = np.zeros(n, dtype=bool)
    active = np.ones(n, dtype=bool)

    for _ in range(max_iter + 1):
        idx = np.flatnonzero(active)
        if not len(idx):
            break
        g = _margin(model, a[idx])
        # ties count as Theft; rows at the cap stop where they are
        keep = (g >= 0.0) & (iterations[idx] < max_iter)
        active[idx[~keep]] = False
        idx, g = idx[keep], g[keep]
        if not len(idx):
            break

        grad = _free_directions(a[idx], _margin_gradient(model, a[idx]))
        norm2 = np.sum(grad * grad, axis=1)
        vanished = np.sqrt(norm2) < GRADIENT_FLOOR
        if vanished.any():
            aborted[idx[vanished]] = True
            active[idx[vanished]] = False
            logger.warning(f"⚠️ DeepFool: vanishing gradient on {int(vanished.sum())} vectors")
            idx, g, grad, norm2 = idx[~vanished], g[~vanished], grad[~vanished], norm2[~vanished]
        scale = (1.0 + OVERSHOOT) * (g + MARGIN_SLACK) / norm2
        a[idx] = clip_nonnegative(a[idx] - scale[:, None] * grad)
        iterations[idx] += 1

    success = ~np.atleast_1d(model.predict_theft(a)) if n else np.zeros(0, dtype=bool)
    return DeepFoolResult(vectors=a, iterations=iterations, success=success, aborted=aborted)


def deepfool_attack(model: NeuralModel, a0: np.ndarray, max_iter: int = 100) -> tuple[np.ndarray, int]:
    """
    DeepFool on one vector.

    Returns:
        (adversarial vector, iterations used)

    Raises:
        VanishingGradientError: ||grad g||_2 fell below 1e-12
    """
    result = deepfool_batch(model, np.asarray(a0, dtype=np.float64).reshape(1, -1), max_iter)
    if result.aborted[0]:
        raise VanishingGradientError(0.0, int(result.iterations[0]))
    return result.vectors[0], int(result.iterations[0])


# ----------------------------------------------------------------------
# ssf-iter: normalized gradient search from a near-zero start
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class SsfTrajectory:
    """Iterates after 0..steps updates, plus gradient evaluations per row."""

    snapshots: list[np.ndarray]
    evaluations: np.ndarray
    halted: np.ndarray


def ssf_iter_trajectory(model: NeuralModel, a0: np.ndarray, steps: int, size: float, keep_snapshots: bool = True) -> SsfTrajectory:
    """
    Run `steps` normalized gradient updates from a0.

    Each update is r = G * size / max|G| with G the Theft-loss input gradient,
    followed by a clip at zero. A row whose max|G| drops below 1e-12 stops
    (that evaluation counts) and keeps its iterate for the remaining steps.
    """
    if steps < 0:
        raise ValidationError(f"step must be >= 0, got {steps}")
    if size <= 0:
        raise ValidationError(f"size must be positive, got {size}")
    a = np.atleast_2d(np.asarray(a0, dtype=np.float64)).copy()
    n = len(a)
    evaluations = np.zeros(n, dtype=np.int64)
    halted = np.zeros(n, dtype=bool)
    snapshots = [a.copy()] if keep_snapshots else []

    for _ in range(steps):
        idx = np.flatnonzero(~halted)
        if len(idx):
            grad = _theft_gradient(model, a[idx]).reshape(len(idx), -1)
            evaluations[idx] += 1
            peak = np.max(np.abs(grad), axis=1)
            stalled = peak < GRADIENT_FLOOR
            if stalled.any():
                halted[idx[stalled]] = True
                logger.debug(f"ssf-iter: {int(stalled.sum())} vectors stopped on a flat gradient")
            move = idx[~stalled]
            a[move] = clip_nonnegative(a[move] + grad[~stalled] * (size / peak[~stalled])[:, None])
        if keep_snapshots:
            snapshots.append(a.copy())

    if not keep_snapshots:
        snapshots = [a]
    return SsfTrajectory(snapshots=snapshots, evaluations=evaluations, halted=halted)


def ssf_iter_attack(
    model: NeuralModel,
    step: int,
    size: float,
    sigma: float = 1e-4,
    rng: Optional[np.random.Generator] = None,
) -> np.ndarray:
    """ssf-iter on one vector: random_init(sigma), then `step` updates."""
    a0 = random_init(READINGS_PER_DAY, sigma, rng)
    return ssf_iter_trajectory(model, a0, step, size, keep_snapshots=False).snapshots[-1][0]


# ----------------------------------------------------------------------
# Vanilla baselines
# ----------------------------------------------------------------------


def va1_attack(base_profile: np.ndarray, alpha: float) -> np.ndarray:
    """alpha * base profile."""
    if not 0.0 < alpha <= 1.0:
        raise ValidationError(f"alpha must be in (0, 1], got {alpha}")
    return alpha * np.asarray(base_profile, dtype=np.float64)


def va2_attack(n: int = READINGS_PER_DAY, u: float = 1.0, rng: Optional[np.random.Generator] = None) -> np.ndarray:
    """n i.i.d. Uniform(0, u) readings."""
    if u <= 0:
        raise ValidationError(f"u must be positive, got {u}")
    rng = rng if rng is not None else np.random.default_rng()
    return rng.uniform(0.0, u, size=n)


# ----------------------------------------------------------------------
# Batch dispatcher and persistence
# ----------------------------------------------------------------------


def generate_batch(
    config: AttackConfig,
    surrogate: Optional[NeuralModel],
    count: int,
    normal_pool: Optional[np.ndarray] = None,
) -> AdversarialBatch:
    """
    Produce `count` adversarial vectors for one attack setting.

    FGSM, FGV, DeepFool and ssf-iter start from random_init(sigma) rows.
    VA1 scales a base profile drawn uniformly from normal_pool per row.

    Args:
        config: Attack setting (its seed drives every random draw)
        surrogate: Model whose gradients are used; unused by VA1/VA2/init-only
        count: Number of vectors
        normal_pool: (M, 48) genuine profiles, required by VA1

    Returns:
        AdversarialBatch with per-vector iteration counts where applicable
    """
    kind = config.kind
    needs_model = kind in (AttackKind.FGSM, AttackKind.FGV, AttackKind.DEEPFOOL, AttackKind.SSF_ITER)
    if needs_model and surrogate is None:
        raise ValidationError(f"{kind.value} needs a surrogate model")
    surrogate_id = surrogate.model_id if surrogate is not None and needs_model else ""
    surrogate_hash = surrogate.fingerprint() if surrogate is not None and needs_model else ""
    iterations = aborted = None

    if kind is AttackKind.INIT_ONLY:
        vectors = init_batch(count, config.sigma, config.seed)
    elif kind is AttackKind.FGSM:
        vectors = fgsm_attack(surrogate, init_batch(count, config.sigma, config.seed), config.epsilon)
    elif kind is AttackKind.FGV:
        vectors = fgv_attack(surrogate, init_batch(count, config.sigma, config.seed), config.epsilon)
    elif kind is AttackKind.DEEPFOOL:
        result = deepfool_batch(surrogate, init_batch(count, config.sigma, config.seed), config.max_iter)
        vectors, iterations, aborted = result.vectors, result.iterations, result.aborted
    elif kind is AttackKind.SSF_ITER:
        trajectory = ssf_iter_trajectory(
            surrogate, init_batch(count, config.sigma, config.seed), config.step, config.size, keep_snapshots=False
        )
        vectors, iterations = trajectory.snapshots[-1], trajectory.evaluations
    elif kind is AttackKind.VA1:
        if normal_pool is None or len(normal_pool) == 0:
            raise InsufficientDataError("VA1 needs a pool of genuine profiles")
        picks = [int(derive_rng(config.seed, i).integers(len(normal_pool))) for i in range(count)]
        vectors = va1_attack(np.asarray(normal_pool)[picks].reshape(count, READINGS_PER_DAY), config.alpha)
    else:
        vectors = (
            np.stack([va2_attack(READINGS_PER_DAY, config.u, derive_rng(config.seed, i)) for i in range(count)])
            if count else np.zeros((0, READINGS_PER_DAY))
        )

    return AdversarialBatch(
        vectors=np.asarray(vectors).reshape(count, READINGS_PER_DAY),
        config=config,
        surrogate_id=surrogate_id,
        surrogate_hash=surrogate_hash,
        iterations=iterations,
        aborted=aborted,
    )


def save_batch(batch: AdversarialBatch, path: Union[str, Path]) -> Path:
    """CSV of r01..r48 plus attack/surrogate/iterations/aborted columns, and a JSON sidecar."""
    path = Path(path)
    frame = pd.DataFrame(batch.vectors, columns=READING_COLUMNS)
    frame["attack"] = batch.config.kind.value
    frame["surrogate"] = batch.surrogate_id
    frame["iterations"] = batch.iterations if batch.iterations is not None else -1
    # -1 marks attacks that do not report the field
    frame["aborted"] = batch.aborted.astype(np.int64) if batch.aborted is not None else -1
    atomic_write(path, lambda tmp: frame.to_csv(tmp, index=False))
    write_json(path.with_suffix(".json"), {
        "config": batch.config.model_dump(mode="json"),
        "surrogate_id": batch.surrogate_id,
        "surrogate_hash": batch.surrogate_hash,
        "rows": len(batch),
        "aborted": batch.aborted_count,
    })
    return path


def load_batch(path: Union[str, Path]) -> AdversarialBatch:
    path = Path(path)
    sidecar = path.with_suffix(".json")
    if not path.exists() or not sidecar.exists():
        raise MissingArtifactError("Adversarial batch", str(path))
    meta = json.loads(sidecar.read_text(encoding="utf-8"))
    frame = pd.read_csv(path, float_precision="round_trip", keep_default_na=False)
    iterations = frame["iterations"].to_numpy(dtype=np.int64)
    aborted = frame["aborted"].to_numpy(dtype=np.int64) if "aborted" in frame else np.full(len(frame), -1)
    return AdversarialBatch(
        vectors=frame[READING_COLUMNS].to_numpy(dtype=np.float64),
        config=AttackConfig(**meta["config"]),
        surrogate_id=meta["surrogate_id"],
        surrogate_hash=meta["surrogate_hash"],
        iterations=None if (iterations < 0).all() and len(iterations) else iterations,
        aborted=None if (aborted < 0).all() and len(aborted) else aborted.astype(bool),
    )
