"""
Core, extended and stage-one evaluation metrics.
"""

from typing import Optional, Sequence

import numpy as np

from ..data.models import IGNORE, NUM_CLASSES, SLOTS_PER_DAY, TimeContext
from ..gbdt.base import ObjectiveError
from ..gbdt.models import DEFAULT_EPSILON
from ..gbdt.objectives import masked_loss
from .base import MetricError
from .models import TargetScore

# Period of every cyclic stage-one target
CYCLES = {"month": 12, "day_of_week": 7, "slot": SLOTS_PER_DAY}


def evaluation_class_weights(labels, num_classes: int = NUM_CLASSES) -> np.ndarray:
    """w_c = N / (C * count_c) over the non-IGNORE evaluation labels.

    Classes absent from the evaluation set get weight 0; no row ever uses it.
    """
    y = np.asarray(labels, dtype=np.int64)
    y = y[y != IGNORE]
    counts = np.bincount(y, minlength=num_classes)[:num_classes].astype(np.float64)
    weights = np.zeros(num_classes)
    present = counts > 0
    weights[present] = len(y) / (num_classes * counts[present])
    return weights


def core_metric(
    probabilities,
    labels,
    class_weights: Optional[Sequence[float]] = None,
    epsilon: float = DEFAULT_EPSILON,
) -> float:
    """Masked class-weighted cross-entropy, the same computation as `gbdt.masked_loss`.

    Args:
        probabilities: (n, C) predicted class probabilities.
        labels: class index or IGNORE per row.
        class_weights (Sequence[float], optional): per-class weights. Defaults to weights
            computed from `labels`.
        epsilon (float, optional): log-ratio stabiliser. Defaults to 1e-9.

    Raises:
        MetricError: every label is IGNORE, or shapes disagree.
    """
    p = np.asarray(probabilities, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    if p.ndim != 2 or p.shape[0] != len(y):
        raise MetricError(f"Probabilities of shape {p.shape} do not match {len(y)} labels")
    if class_weights is None:
        class_weights = evaluation_class_weights(y, p.shape[1])
    try:
        return masked_loss(p, y, class_weights, epsilon)
    except ObjectiveError as e:
        raise MetricError(str(e))


def extended_metric(predicted_etas, true_etas) -> float:
    """Mean absolute error.

    Raises:
        MetricError: empty or unequal-length inputs.
    """
    pred = np.asarray(predicted_etas, dtype=np.float64)
    true = np.asarray(true_etas, dtype=np.float64)
    if pred.shape != true.shape:
        raise MetricError(f"{pred.size} predictions for {true.size} targets")
    if pred.size == 0:
        raise MetricError("Cannot score an empty ETA set")
    return float(np.abs(pred - true).mean())


def cyclic_distance(a, b, period: int) -> np.ndarray:
    d = np.abs(np.asarray(a) - np.asarray(b)) % period
    return np.minimum(d, period - d)


def stage1_metric(
    predicted_contexts: Sequence[TimeContext], true_contexts: Sequence[TimeContext]
) -> dict[str, TargetScore]:
    """Exact-match rate and mean cyclic deviation for month, day of week and slot.

    Raises:
        MetricError: empty or unequal-length inputs.
    """
    if len(predicted_contexts) != len(true_contexts):
        raise MetricError(
            f"{len(predicted_contexts)} predicted contexts for {len(true_contexts)} true ones"
        )
    if not predicted_contexts:
        raise MetricError("Cannot score an empty context set")
    scores = {}
    for target, period in CYCLES.items():
        pred = np.array([getattr(c, target) for c in predicted_contexts])
        true = np.array([getattr(c, target) for c in true_contexts])
        scores[target] = TargetScore(
            accuracy=float(np.mean(pred == true)),
            mad=float(cyclic_distance(pred, true, period).mean()),
        )
    return scores
