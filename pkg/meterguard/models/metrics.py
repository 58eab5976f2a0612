"""Classifier quality on a labeled dataset (Theft is the positive class)."""
import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Optional

import numpy as np

from ..nn.network import NeuralModel
from ..schemas.report import ClassifierMetrics
from ..services.datasets import LabeledDataset
from ..utils.errors import InsufficientDataError

logger = logging.getLogger(__name__)

SHARD_ROWS = 2048


def confusion_counts(predicted_theft: np.ndarray, labels: np.ndarray) -> tuple[int, int, int, int]:
    """(TP, FP, TN, FN) from boolean Theft decisions and 0/1 labels."""
    predicted = np.asarray(predicted_theft, dtype=bool)
    actual = np.asarray(labels) == 1
    tp = int(np.sum(predicted & actual))
    fp = int(np.sum(predicted & ~actual))
    tn = int(np.sum(~predicted & ~actual))
    fn = int(np.sum(~predicted & actual))
    return tp, fp, tn, fn


def evaluate_classifier(
    model: NeuralModel,
    dataset: LabeledDataset,
    seed: Optional[int] = None,
    jobs: int = 1,
) -> ClassifierMetrics:
    """
    Argmax classification of every row (exact ties count as Theft).

    Shards of the dataset may be scored on several threads; counts are summed,
    so the result does not depend on jobs.
    """
    if len(dataset) == 0:
        raise InsufficientDataError("Cannot evaluate on an empty dataset")

    bounds = [(start, min(start + SHARD_ROWS, len(dataset))) for start in range(0, len(dataset), SHARD_ROWS)]

    def _score(bound: tuple[int, int]) -> tuple[int, int, int, int]:
        lo, hi = bound
        return confusion_counts(model.predict_theft(dataset.profiles[lo:hi]), dataset.labels[lo:hi])

    if jobs > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            parts = list(pool.map(_score, bounds))
    else:
        parts = [_score(b) for b in bounds]

    tp, fp, tn, fn = (sum(p[i] for p in parts) for i in range(4))
    metrics = ClassifierMetrics(model_id=model.model_id, tp=tp, fp=fp, tn=tn, fn=fn, seed=seed)
    logger.info(
        f"📊 {model.model_id}: accuracy {metrics.accuracy:.3f}, FPR {metrics.fpr:.3f}, recall {metrics.recall:.3f}"
    )
    return metrics
