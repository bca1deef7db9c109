"""
Stage one: recover (month, day of week, slot) from one hour of counter volumes.

Every target is a plain L2 regression over the volumes of all counters; the preset
predictions are averaged, rounded half away from zero and clamped to the valid range.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Optional, Sequence

import numpy as np

from ..data.base import SnapshotError
from ..data.models import LAG_MINUTES, CounterSnapshot, RoadGraph, TimeContext
from ..gbdt.booster import predict, train
from ..gbdt.models import PRESET_A, PRESET_B, FeatureMatrix, GbdtModel, GbdtParams, Objective
from .base import StagingError
from .models import PRESET_NAMES, StageOneModel, StageTarget

logger = logging.getLogger(__name__)


def stage1_feature_names(counter_ids: Sequence[int]) -> tuple[str, ...]:
    """Column layout: sorted counter id major, lag minor"""
    return tuple(f"node{node}_lag{m}" for node in sorted(counter_ids) for m in LAG_MINUTES)


def _check_snapshot(snapshot: CounterSnapshot, city: str, counter_ids: Sequence[int]) -> None:
    if snapshot.city != city:
        raise SnapshotError(
            f"Snapshot {snapshot.snapshot_id} belongs to '{snapshot.city}', not '{city}'"
        )
    unknown = set(snapshot.volumes) - set(counter_ids)
    if unknown:
        raise SnapshotError(
            f"Snapshot {snapshot.snapshot_id} has volumes for non-counter nodes {sorted(unknown)}"
        )


def _volume_matrix(
    snapshots: Sequence[CounterSnapshot], city: str, counter_ids: Sequence[int]
) -> FeatureMatrix:
    ids = sorted(counter_ids)
    rows = []
    for snapshot in snapshots:
        _check_snapshot(snapshot, city, ids)
        rows.append(snapshot.volume_matrix(ids).ravel())
    values = np.vstack(rows) if rows else np.empty((0, len(ids) * len(LAG_MINUTES)))
    return FeatureMatrix(values=values, column_names=stage1_feature_names(ids))


def stage1_features(snapshot: CounterSnapshot, graph: RoadGraph) -> FeatureMatrix:
    """One-row feature matrix of the snapshot's counter volumes, MISSING where absent.

    Raises:
        SnapshotError: the snapshot belongs to another city or names non-counter nodes.
    """
    return _volume_matrix([snapshot], graph.city, graph.counter_ids)


def _targets(snapshots: Sequence[CounterSnapshot], target: StageTarget) -> np.ndarray:
    return np.array([getattr(s.true_context, target.value) for s in snapshots], dtype=np.float64)


def _require_contexts(snapshots: Sequence[CounterSnapshot]) -> None:
    missing = [s.snapshot_id for s in snapshots if s.true_context is None]
    if missing:
        raise StagingError(f"{len(missing)} snapshots lack a true context, e.g. {missing[0]}")


def train_stage1(
    snapshots: Sequence[CounterSnapshot],
    graph: RoadGraph,
    presets: Sequence[GbdtParams] = (PRESET_A, PRESET_B),
    validation: Optional[Sequence[CounterSnapshot]] = None,
    fixed_rounds: Optional[dict[str, int]] = None,
    n_jobs: int = 1,
    log_every: int = 100,
) -> StageOneModel:
    """Train one squared-error regressor per (target, preset).

    Args:
        snapshots (Sequence[CounterSnapshot]): training snapshots with true contexts.
        graph (RoadGraph): the city's road graph; fixes the counter layout.
        presets (Sequence[GbdtParams], optional): ensemble members. Defaults to presets A and B.
        validation (Sequence[CounterSnapshot], optional): early stopping set. Defaults to None.
        fixed_rounds (dict[str, int], optional): member name -> exact round count, as returned by
            `StageOneModel.best_rounds()`; disables early stopping. Defaults to None.
        n_jobs (int, optional): threads used across the independent members. Defaults to 1.
        log_every (int, optional): boosting progress cadence. Defaults to 100.

    Raises:
        StagingError: no snapshots, or a snapshot without a true context.
    """
    if not snapshots:
        raise StagingError("Stage one needs at least one training snapshot")
    _require_contexts(snapshots)
    counter_ids = graph.counter_ids
    x = _volume_matrix(snapshots, graph.city, counter_ids)
    x_valid = None
    if validation:
        _require_contexts(validation)
        x_valid = _volume_matrix(validation, graph.city, counter_ids)

    jobs = []
    for target in StageTarget:
        for i, params in enumerate(presets):
            name = f"{target.value}.{PRESET_NAMES[i]}"
            valid = None if x_valid is None else (x_valid, _targets(validation, target))
            if fixed_rounds is not None:
                params = params.model_copy(update={"num_rounds": fixed_rounds[name]})
                valid = None
            jobs.append((target, name, params, valid))

    def fit(job) -> GbdtModel:
        target, name, params, valid = job
        logger.info("Training stage-one member %s (%d rows)", name, x.rows)
        return train(
            x, _targets(snapshots, target), Objective.squared_error(), params, valid, log_every
        )

    with ThreadPoolExecutor(max_workers=max(1, n_jobs)) as pool:
        fitted = list(pool.map(fit, jobs))

    heads = {target: [] for target in StageTarget}
    for (target, *_), model in zip(jobs, fitted):
        heads[target].append(model)
    return StageOneModel(
        city=graph.city,
        counter_ids=tuple(counter_ids),
        feature_names=x.column_names,
        heads={t: tuple(m) for t, m in heads.items()},
    )


def round_half_away(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    return np.sign(x) * np.floor(np.abs(x) + 0.5)


def combine_predictions(target: StageTarget, predictions: Sequence[np.ndarray]) -> np.ndarray:
    """Average member predictions, round half away from zero and clamp to the target range"""
    lo, hi = target.bounds
    mean = np.mean(np.vstack(predictions), axis=0)
    return np.clip(round_half_away(mean), lo, hi).astype(np.int64)


def predict_contexts(
    model: StageOneModel, snapshots: Sequence[CounterSnapshot]
) -> list[TimeContext]:
    """Vectorised `predict_context` over many snapshots.

    Raises:
        StagingError: a snapshot does not fit the model's city or counter layout.
    """
    if not snapshots:
        return []
    for snapshot in snapshots:
        model.check_city(snapshot.city)
    try:
        x = _volume_matrix(snapshots, model.city, model.counter_ids)
    except SnapshotError as e:
        raise StagingError(f"Snapshot does not fit the stage-one layout: {e}")
    if x.column_names != model.feature_names:
        raise StagingError("Snapshot layout differs from the persisted stage-one layout")

    fields = {
        target: combine_predictions(target, [predict(m, x) for m in model.heads[target]])
        for target in StageTarget
    }
    return [
        TimeContext(
            month=int(fields[StageTarget.MONTH][i]),
            day_of_week=int(fields[StageTarget.DAY_OF_WEEK][i]),
            slot=int(fields[StageTarget.SLOT][i]),
        )
        for i in range(x.rows)
    ]


def predict_context(model: StageOneModel, snapshot: CounterSnapshot) -> TimeContext:
    """Recovered time context of one snapshot; the weekend flag follows the rounded day"""
    return predict_contexts(model, [snapshot])[0]
