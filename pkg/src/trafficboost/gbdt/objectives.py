"""
Squared error, absolute error and masked class-weighted softmax objectives.
"""

import numpy as np

from ..data.models import IGNORE
from .base import BaseObjective, ObjectiveError, TrainingError
from .models import Objective, ObjectiveKind


def softmax(raw: np.ndarray) -> np.ndarray:
    """Row-wise softmax of raw scores"""
    shifted = raw - raw.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def class_weights(targets, num_classes: int) -> np.ndarray:
    """Balanced class weights w_c = N / (C * count_c) over non-IGNORE targets.

    Raises:
        ObjectiveError: a class never occurs among the non-IGNORE targets.
    """
    y = np.asarray(targets, dtype=np.int64)
    y = y[y != IGNORE]
    counts = np.bincount(y, minlength=num_classes)[:num_classes]
    absent = np.flatnonzero(counts == 0)
    if absent.size:
        raise ObjectiveError(
            f"Class {int(absent[0])} is absent from the targets; its weight is undefined"
        )
    return len(y) / (num_classes * counts.astype(np.float64))


def masked_loss(probabilities, targets, weights, epsilon: float) -> float:
    """Class-weighted cross-entropy that skips IGNORE rows.

    Each kept row n contributes -w[y_n] * log((p[n, y_n] + eps) / (sum_c p[n, c] + eps));
    the sum is divided by the total weight of the kept rows.

    Raises:
        ObjectiveError: every row is IGNORE.
    """
    p = np.asarray(probabilities, dtype=np.float64)
    y = np.asarray(targets, dtype=np.int64)
    w = np.asarray(weights, dtype=np.float64)
    if epsilon < 0:
        raise ObjectiveError(f"epsilon must be non-negative, got: {epsilon}")
    keep = y != IGNORE
    if not keep.any():
        raise ObjectiveError("All rows are IGNORE; the masked loss is undefined")
    p, y = p[keep], y[keep]
    row_w = w[y]
    ratio = (p[np.arange(len(y)), y] + epsilon) / (p.sum(axis=1) + epsilon)
    return float(-(row_w * np.log(ratio)).sum() / row_w.sum())


class SquaredError(BaseObjective):
    """0.5 * (pred - y)^2"""

    def check_targets(self, targets) -> np.ndarray:
        y = np.asarray(targets, dtype=np.float64).ravel()
        if not np.all(np.isfinite(y)):
            raise TrainingError("Regression targets must be finite")
        return y

    def base_score(self, targets: np.ndarray) -> np.ndarray:
        return np.array([targets.mean()])

    def gradients(self, raw, targets):
        g = raw[:, 0] - targets
        return g[:, None], np.ones_like(g)[:, None]

    def row_loss(self, raw, targets):
        return 0.5 * (raw[:, 0] - targets) ** 2

    def transform(self, raw):
        return raw[:, 0]


class AbsoluteError(SquaredError):
    """|pred - y|, with median refinement of every leaf"""

    refines_leaves = True

    def base_score(self, targets: np.ndarray) -> np.ndarray:
        return np.array([np.median(targets)])

    def gradients(self, raw, targets):
        g = np.sign(raw[:, 0] - targets)
        return g[:, None], np.ones_like(g)[:, None]

    def row_loss(self, raw, targets):
        return np.abs(raw[:, 0] - targets)


class MaskedWeightedSoftmax(BaseObjective):
    """Class-weighted softmax cross-entropy; IGNORE rows carry no gradient"""

    def _weights(self) -> np.ndarray:
        if self.objective.class_weights is None:
            return np.ones(self.num_outputs)
        return np.asarray(self.objective.class_weights, dtype=np.float64)

    def check_targets(self, targets) -> np.ndarray:
        y = np.asarray(targets)
        if y.dtype.kind == "f":
            if not np.all(np.isfinite(y)):
                raise TrainingError("Class targets must be finite")
            if not np.all(y == np.round(y)):
                raise TrainingError("Class targets must be integers")
        y = y.astype(np.int64).ravel()
        bad = (y != IGNORE) & ((y < 0) | (y >= self.num_outputs))
        if bad.any():
            raise TrainingError(
                f"Class targets must be in [0, {self.num_outputs}) or IGNORE, got: {y[bad][0]}"
            )
        if np.all(y == IGNORE):
            raise TrainingError("All targets are IGNORE; nothing to train on")
        return y

    def row_weights(self, targets):
        w = np.zeros(len(targets))
        keep = targets != IGNORE
        w[keep] = self._weights()[targets[keep]]
        return w

    def base_score(self, targets):
        return np.zeros(self.num_outputs)

    def gradients(self, raw, targets):
        p = softmax(raw)
        keep = targets != IGNORE
        onehot = np.zeros_like(p)
        onehot[np.flatnonzero(keep), targets[keep]] = 1.0
        w = self.row_weights(targets)[:, None]
        g = w * (p - onehot)
        h = w * p * (1.0 - p)
        return g, h

    def row_loss(self, raw, targets):
        shifted = raw - raw.max(axis=1, keepdims=True)
        log_p = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
        keep = targets != IGNORE
        out = np.zeros(len(targets))
        rows = np.flatnonzero(keep)
        out[rows] = -self._weights()[targets[rows]] * log_p[rows, targets[rows]]
        return out

    def loss(self, raw, targets) -> float:
        return masked_loss(softmax(raw), targets, self._weights(), self.objective.epsilon)

    def transform(self, raw):
        return softmax(raw)


_OBJECTIVES: dict[ObjectiveKind, type[BaseObjective]] = {
    ObjectiveKind.SQUARED_ERROR: SquaredError,
    ObjectiveKind.ABSOLUTE_ERROR: AbsoluteError,
    ObjectiveKind.MASKED_WEIGHTED_SOFTMAX: MaskedWeightedSoftmax,
}


def get_objective(objective: Objective) -> BaseObjective:
    """Instantiate the implementation of an objective.

    Raises:
        ObjectiveError: the objective kind has no implementation.
    """
    try:
        impl = _OBJECTIVES[objective.kind]
    except KeyError:
        raise ObjectiveError(f"Unknown objective kind: {objective.kind}")
    return impl(objective)


def gradients(objective: Objective, predictions, targets) -> tuple[np.ndarray, np.ndarray]:
    """Per-row, per-output gradient and hessian of `objective` at raw `predictions`.

    Args:
        objective (Objective): loss to differentiate.
        predictions: raw scores, shape (n,) or (n, num_outputs).
        targets: regression values, or class indices / IGNORE for softmax.

    Returns:
        tuple[np.ndarray, np.ndarray]: gradient and hessian, each (n, num_outputs).
    """
    impl = get_objective(objective)
    raw = np.asarray(predictions, dtype=np.float64)
    if raw.ndim == 1:
        raw = raw[:, None]
    y = np.asarray(targets)
    y = y.astype(np.int64) if objective.is_multiclass else y.astype(np.float64)
    if raw.shape != (len(y), impl.num_outputs):
        raise ObjectiveError(
            f"Predictions of shape {raw.shape} do not match {len(y)} targets "
            f"with {impl.num_outputs} outputs"
        )
    return impl.gradients(raw, y)
