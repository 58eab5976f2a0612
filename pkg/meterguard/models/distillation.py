"""
Defensive distillation.

A teacher network is trained with a temperature-T softmax on hard labels. Its
temperature-T probabilities on the training set become soft labels for a
student of the same architecture, also trained at T. The student is deployed
at T = 1, which saturates its softmax and flattens input gradients.
"""
import logging
from dataclasses import dataclass

import numpy as np

from ..nn.network import NeuralModel
from ..nn.training import train
from ..schemas.training import DistillConfig
from ..services.datasets import LabeledDataset
from ..utils.errors import ValidationError
from .architectures import ArchitectureId, build_model

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class DistillResult:
    teacher: NeuralModel
    student: NeuralModel
    teacher_history: tuple[float, ...]
    student_history: tuple[float, ...]


def distill(
    arch: ArchitectureId,
    dataset: LabeledDataset,
    config: DistillConfig,
    seed: int = 0,
) -> DistillResult:
    """
    Train a teacher and a distilled student for one architecture.

    Args:
        arch: Architecture shared by teacher and student
        dataset: Training set with hard labels
        config: Temperature and training hyper-parameters (config.train.temperature is ignored)
        seed: Initialization seed; the student uses seed + 1

    Returns:
        DistillResult; the student has model_id "<arch>-distilled" and temperature 1
    """
    if config.temperature < 1:
        raise ValidationError(f"Distillation temperature must be >= 1, got {config.temperature}")
    t = config.temperature
    train_config = config.train.model_copy(update={"temperature": t})

    teacher = build_model(arch, seed)
    teacher_run = train(teacher, dataset, train_config)
    soft_labels = teacher_run.model.forward(dataset.profiles, temperature=t)
    logger.info(f"🌡️ Teacher {arch.name} trained at T={t:g}; mean soft Theft prob {np.mean(soft_labels[:, 1]):.3f}")

    student = build_model(arch, seed + 1)
    student_run = train(student, dataset, train_config.model_copy(update={"seed": train_config.seed + 1}), soft_targets=soft_labels)
    deployed = student_run.model.with_params(
        student_run.model.params,
        model_id=arch.model_id(distilled=True),
        temperature=1.0,
    )
    logger.info(f"✅ Distilled {deployed.model_id}")
    return DistillResult(
        teacher=teacher_run.model,
        student=deployed,
        teacher_history=teacher_run.loss_history,
        student_history=student_run.loss_history,
    )
