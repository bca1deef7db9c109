"""
Boosting loop, early stopping and ensemble prediction.
"""

import logging
from typing import Optional

import numpy as np

from .base import PredictionError, TrainingError
from .binning import BinMapper
from .grower import TreeGrower, refine_leaves
from .models import FeatureMatrix, GbdtModel, GbdtParams, Objective
from .objectives import class_weights, get_objective

logger = logging.getLogger(__name__)


class EarlyStopping:
    """Stops boosting once the validation loss has not improved for `patience` rounds.

    Args:
        patience (int): rounds to wait after the last improvement.
        delta (float, optional): minimum decrease that counts as an improvement. Defaults to 0.
    """

    def __init__(self, patience: int, delta: float = 0.0):
        self.patience = patience
        self.delta = delta
        self.counter = 0
        self.best_score: Optional[float] = None
        self.best_round = 0
        self.early_stop = False

    def __call__(self, val_loss: float, round_number: int) -> bool:
        """Record the loss after `round_number` (1-based); returns True when training should stop"""
        if self.best_score is None or val_loss < self.best_score - self.delta:
            self.best_score = val_loss
            self.best_round = round_number
            self.counter = 0
        else:
            self.counter += 1
            if self.counter >= self.patience:
                self.early_stop = True
        return self.early_stop


def _sample(rng: np.random.Generator, population: np.ndarray, fraction: float) -> np.ndarray:
    k = max(1, int(round(fraction * len(population))))
    return np.sort(rng.choice(population, size=k, replace=False))


def train(
    features: FeatureMatrix,
    targets,
    objective: Objective,
    params: GbdtParams,
    validation: Optional[tuple[FeatureMatrix, object]] = None,
    log_every: int = 100,
) -> GbdtModel:
    """Fit a boosted tree ensemble.

    Args:
        features (FeatureMatrix): training features, NaN for MISSING.
        targets: one real per row, or a class index / IGNORE per row for softmax.
        objective (Objective): loss to minimise. Softmax objectives without class weights get
            balanced weights computed from `targets`.
        params (GbdtParams): hyperparameters; `seed` drives all row and column sampling.
        validation (tuple[FeatureMatrix, targets], optional): held-out set for early stopping.
            Defaults to None, in which case exactly `params.num_rounds` rounds are run.
        log_every (int, optional): DEBUG progress cadence in rounds. Defaults to 100.

    Raises:
        TrainingError: empty feature matrix, misaligned targets, all-IGNORE or non-finite targets.

    Returns:
        GbdtModel: trees up to `best_round` (the validation optimum, or `num_rounds`).
    """
    if features.rows == 0 or features.columns == 0:
        raise TrainingError("Cannot train on an empty feature matrix")
    if len(targets) != features.rows:
        raise TrainingError(f"{len(targets)} targets for {features.rows} rows")

    impl = get_objective(objective)
    y = impl.check_targets(targets)
    if objective.is_multiclass and objective.class_weights is None:
        weights = class_weights(y, objective.num_classes)
        objective = objective.model_copy(update={"class_weights": tuple(weights.tolist())})
        impl = get_objective(objective)

    x_valid = y_valid = None
    if validation is not None:
        x_valid, y_valid = validation
        if x_valid.column_names != features.column_names:
            raise TrainingError("Validation columns do not match training columns")
        y_valid = impl.check_targets(y_valid)

    rng = np.random.default_rng(params.seed)
    active = impl.active_rows(y)
    # IGNORE rows take no part in training, bin thresholds included
    mapper = BinMapper(params.histogram_bins).fit(features.values[active])
    binned = mapper.transform(features.values)
    grower = TreeGrower(binned, mapper, params, rng)

    k = impl.num_outputs
    base = impl.base_score(y)
    raw = np.tile(base, (features.rows, 1))
    raw_valid = None if x_valid is None else np.tile(base, (x_valid.rows, 1))
    all_features = np.arange(features.columns)

    stopper = EarlyStopping(params.early_stopping_rounds)
    trees = []
    train_history: list[float] = []
    valid_history: list[float] = []
    for round_index in range(params.num_rounds):
        g, h = impl.gradients(raw, y)
        rows = _sample(rng, active, params.subsample)
        tree_features = _sample(rng, all_features, params.colsample_bytree)
        for c in range(k):
            tree, leaf_ids = grower.grow(g[:, c], h[:, c], rows, tree_features)
            if impl.refines_leaves:
                residuals = y[rows] - raw[rows, c]
                tree = refine_leaves(tree, objective, residuals, leaf_ids, params.learning_rate)
            raw[:, c] += tree.predict(features.values)
            if raw_valid is not None:
                raw_valid[:, c] += tree.predict(x_valid.values)
            trees.append(tree)

        train_history.append(impl.loss(raw, y))
        if raw_valid is not None:
            valid_loss = impl.loss(raw_valid, y_valid)
            valid_history.append(valid_loss)
            if stopper(valid_loss, round_index + 1):
                logger.info(
                    "Early stop after round %d; best round %d (loss %.6f)",
                    round_index + 1,
                    stopper.best_round,
                    stopper.best_score,
                )
                break
        if log_every and (round_index + 1) % log_every == 0:
            logger.debug(
                "round %d train %.6f%s",
                round_index + 1,
                train_history[-1],
                f" valid {valid_history[-1]:.6f}" if valid_history else "",
            )

    best_round = stopper.best_round if raw_valid is not None else len(train_history)
    return GbdtModel(
        objective=objective,
        params=params,
        base_score=tuple(float(b) for b in base),
        trees=tuple(trees[: best_round * k]),
        best_round=best_round,
        feature_names=features.column_names,
        train_history=tuple(train_history),
        valid_history=tuple(valid_history),
    )


def predict_raw(model: GbdtModel, features: FeatureMatrix) -> np.ndarray:
    """Raw scores, shape (rows, num_outputs), using trees up to `best_round`"""
    if features.column_names != model.feature_names:
        raise PredictionError(
            f"Feature columns do not match the model's {len(model.feature_names)} columns"
        )
    k = model.num_outputs
    raw = np.tile(np.asarray(model.base_score, dtype=np.float64), (features.rows, 1))
    for i, tree in enumerate(model.trees[: model.best_round * k]):
        raw[:, i % k] += tree.predict(features.values)
    return raw


def predict(model: GbdtModel, features: FeatureMatrix) -> np.ndarray:
    """Model outputs: one real per row, or per-class probabilities for softmax models.

    Raises:
        PredictionError: feature columns differ from `model.feature_names`.
    """
    return get_objective(model.objective).transform(predict_raw(model, features))


def feature_importance(model: GbdtModel, importance_type: str = "gain") -> dict[str, float]:
    """Total split gain ('gain') or number of splits ('split') per feature"""
    if importance_type not in ("gain", "split"):
        raise ValueError(f"importance_type must be 'gain' or 'split', got: {importance_type}")
    totals = np.zeros(len(model.feature_names))
    for tree in model.trees[: model.best_round * model.num_outputs]:
        internal = ~tree.is_leaf
        amount = tree.gain[internal] if importance_type == "gain" else np.ones(internal.sum())
        np.add.at(totals, tree.feature[internal], amount)
    return dict(zip(model.feature_names, totals.tolist()))
