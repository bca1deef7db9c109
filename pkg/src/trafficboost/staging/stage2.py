"""
Stage two: per-edge congestion classes and per-super-segment ETAs.

Training rows use true contexts and leave-one-day-out encodings; at inference the supplied
context (predicted, or ground truth for ablations) drives both encodings and calendar columns.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from datetime import date
from typing import Optional, Sequence

import numpy as np

from ..data.base import SnapshotError
from ..data.models import (
    NUM_CLASSES,
    CounterSnapshot,
    RoadGraph,
    SnapshotLabels,
    TimeContext,
)
from ..encoding.encoders import encode_edges, encode_supersegments
from ..encoding.features import (
    CONTEXT_COLUMNS_CORE,
    CONTEXT_COLUMNS_EXTENDED,
    EXTENDED_FEATURES,
    build_core_features,
    build_extended_features,
    edge_static_columns,
)
from ..encoding.models import (
    DEFAULT_PSEUDOCOUNT,
    CcEncodingTable,
    ConditioningSet,
    EtaEncodingTable,
)
from ..gbdt.base import ObjectiveError
from ..gbdt.booster import predict, train
from ..gbdt.models import PRESET_A, PRESET_B, FeatureMatrix, GbdtModel, GbdtParams, Objective
from ..gbdt.objectives import class_weights as balanced_class_weights
from .base import StagingError
from .models import PRESET_NAMES, StageTwoModel

logger = logging.getLogger(__name__)

# Floor applied to predicted ETAs, in seconds
ETA_FLOOR = 1.0


def _aligned_labels(
    snapshots: Sequence[CounterSnapshot], labels: Sequence[SnapshotLabels]
) -> list[SnapshotLabels]:
    by_id = {lab.snapshot_id: lab for lab in labels}
    missing = [s.snapshot_id for s in snapshots if s.snapshot_id not in by_id]
    if missing:
        raise StagingError(f"{len(missing)} snapshots have no labels, e.g. {missing[0]}")
    return [by_id[s.snapshot_id] for s in snapshots]


def _labelled(
    snapshots: Sequence[CounterSnapshot],
    labels: Sequence[SnapshotLabels],
    contexts: Sequence[TimeContext],
) -> tuple[list[CounterSnapshot], list[SnapshotLabels], list[TimeContext]]:
    """Drop snapshots whose labels hold no class and no ETA"""
    keep = [i for i, lab in enumerate(labels) if lab.has_labels]
    return (
        [snapshots[i] for i in keep],
        [labels[i] for i in keep],
        [contexts[i] for i in keep],
    )


def _contexts(
    snapshots: Sequence[CounterSnapshot], contexts: Optional[Sequence[TimeContext]]
) -> list[TimeContext]:
    if contexts is None:
        contexts = [s.true_context for s in snapshots]
    if len(contexts) != len(snapshots):
        raise StagingError(f"{len(contexts)} contexts for {len(snapshots)} snapshots")
    missing = [s.snapshot_id for s, c in zip(snapshots, contexts) if c is None]
    if missing:
        raise StagingError(f"{len(missing)} snapshots lack a context, e.g. {missing[0]}")
    return list(contexts)


def _days(snapshots: Sequence[CounterSnapshot]) -> list[date]:
    missing = [s.snapshot_id for s in snapshots if s.day is None]
    if missing:
        raise StagingError(
            f"Training snapshots need a calendar day for leave-one-day-out, e.g. {missing[0]}"
        )
    return [s.day for s in snapshots]


def fit_tables(
    graph: RoadGraph,
    snapshots: Sequence[CounterSnapshot],
    labels: Sequence[SnapshotLabels],
    contexts: Optional[Sequence[TimeContext]] = None,
    pseudocount: float = DEFAULT_PSEUDOCOUNT,
) -> tuple[CcEncodingTable, EtaEncodingTable]:
    """Fit both encoding tables on the labels of `snapshots`.

    Raises:
        StagingError: missing labels, contexts or days, or no super-segment labels at all.
    """
    labels = _aligned_labels(snapshots, labels)
    contexts = _contexts(snapshots, contexts)
    days = _days(snapshots)
    edge_ids = np.array(graph.edge_ids, dtype=np.int64)
    seg_ids = np.array(graph.supersegment_ids, dtype=np.int64)

    def stamp(n: int, day: date, ctx: TimeContext) -> tuple[np.ndarray, ...]:
        return (
            np.full(n, day.toordinal()),
            np.full(n, ctx.slot),
            np.full(n, ctx.day_of_week),
        )

    cc_rows, eta_rows = [], []
    for day, ctx, lab in zip(days, contexts, labels):
        cc = lab.congestion_vector(graph)
        cc_rows.append((edge_ids, *stamp(len(cc), day, ctx), cc))
        eta = lab.eta_vector(graph)
        seen = ~np.isnan(eta)
        if seen.any():
            eta_rows.append((seg_ids[seen], *stamp(int(seen.sum()), day, ctx), eta[seen]))

    if not eta_rows:
        raise StagingError("No super-segment ETA labels to fit the ETA encoding")
    cc_table = CcEncodingTable.from_observations(
        *(np.concatenate(col) for col in zip(*cc_rows)), pseudocount=pseudocount
    )
    eta_table = EtaEncodingTable.from_observations(
        *(np.concatenate(col) for col in zip(*eta_rows))
    )
    return cc_table, eta_table


def _context_free(names: Sequence[str], context_columns: Sequence[str]) -> list[str]:
    return [n for n in names if n not in context_columns]


def _design(
    graph: RoadGraph,
    snapshots: Sequence[CounterSnapshot],
    labels: Sequence[SnapshotLabels],
    contexts: Sequence[TimeContext],
    cc_table: CcEncodingTable,
    eta_table: EtaEncodingTable,
    leave_day_out: bool,
) -> tuple[FeatureMatrix, np.ndarray, FeatureMatrix, np.ndarray]:
    """Stacked core and extended training matrices with their targets"""
    statics = edge_static_columns(graph)
    core_x, core_y, ext_x, ext_y = [], [], [], []
    for snapshot, lab, ctx in zip(snapshots, labels, contexts):
        exclude = snapshot.day if leave_day_out else None
        core_x.append(build_core_features(graph, snapshot, ctx, cc_table, exclude, statics))
        core_y.append(lab.congestion_vector(graph))
        eta = lab.eta_vector(graph)
        seen = ~np.isnan(eta)
        if seen.any():
            ext = build_extended_features(graph, ctx, eta_table, exclude)
            ext_x.append(ext.values[seen])
            ext_y.append(eta[seen])
    if not ext_x:
        raise StagingError("No super-segment ETA labels to train the ETA head")
    core = FeatureMatrix.vstack(core_x)
    ext = FeatureMatrix(values=np.vstack(ext_x), column_names=EXTENDED_FEATURES)
    return core, np.concatenate(core_y), ext, np.concatenate(ext_y)


def train_stage2(
    labels: Sequence[SnapshotLabels],
    graph: RoadGraph,
    snapshots: Sequence[CounterSnapshot],
    contexts: Optional[Sequence[TimeContext]] = None,
    presets: Sequence[GbdtParams] = (PRESET_A, PRESET_B),
    pseudocount: float = DEFAULT_PSEUDOCOUNT,
    validation: Optional[
        tuple[Sequence[CounterSnapshot], Sequence[SnapshotLabels]]
    ] = None,
    fixed_rounds: Optional[dict[str, int]] = None,
    context_free: bool = False,
    class_weights: Optional[Sequence[float]] = None,
    n_jobs: int = 1,
    log_every: int = 100,
) -> StageTwoModel:
    """Train the congestion ensemble and the ETA regressor of one city.

    Args:
        labels (Sequence[SnapshotLabels]): labels of every training snapshot; snapshots whose
            labels hold no class and no ETA are skipped.
        graph (RoadGraph): the city's road graph.
        snapshots (Sequence[CounterSnapshot]): training snapshots, each with a calendar day.
        contexts (Sequence[TimeContext], optional): contexts aligned with `snapshots`.
            Defaults to the snapshots' true contexts.
        presets (Sequence[GbdtParams], optional): one congestion model per preset; the ETA
            model uses the last preset. Defaults to presets A and B.
        pseudocount (float, optional): congestion encoding smoothing weight. Defaults to 20.
        validation (tuple, optional): (snapshots, labels) for early stopping, encoded with the
            training tables and their true contexts. Defaults to None.
        fixed_rounds (dict[str, int], optional): member name -> exact round count; disables
            early stopping. Defaults to None.
        context_free (bool, optional): drop every context-dependent column. Defaults to False.
        class_weights (Sequence[float], optional): congestion class weights. Defaults to
            balanced weights from the training labels.
        n_jobs (int, optional): threads used across the independent members. Defaults to 1.
        log_every (int, optional): boosting progress cadence. Defaults to 100.

    Raises:
        StagingError: missing labels, contexts or days; a class absent from the labels;
            no super-segment labels.
    """
    if not snapshots:
        raise StagingError("Stage two needs at least one training snapshot")
    if any(s.city != graph.city for s in snapshots):
        raise SnapshotError(f"Training snapshots must all belong to '{graph.city}'")
    labels = _aligned_labels(snapshots, labels)
    contexts = _contexts(snapshots, contexts)
    snapshots, labels, contexts = _labelled(snapshots, labels, contexts)
    if not snapshots:
        raise StagingError("None of the training snapshots carries a label")
    logger.info("Stage two trains on %d labelled snapshots", len(snapshots))
    cc_table, eta_table = fit_tables(graph, snapshots, labels, contexts, pseudocount)
    core_x, core_y, ext_x, ext_y = _design(
        graph, snapshots, labels, contexts, cc_table, eta_table, leave_day_out=True
    )

    if class_weights is None:
        try:
            class_weights = balanced_class_weights(core_y, NUM_CLASSES)
        except ObjectiveError as e:
            raise StagingError(f"Cannot weight congestion classes: {e}")
    core_objective = Objective.masked_softmax(NUM_CLASSES, tuple(float(w) for w in class_weights))

    core_valid = ext_valid = None
    if validation is not None and fixed_rounds is None:
        v_snapshots, v_labels = validation
        v_labels = _aligned_labels(v_snapshots, v_labels)
        v_snapshots, v_labels, v_contexts = _labelled(
            v_snapshots, v_labels, _contexts(v_snapshots, None)
        )
        if not v_snapshots:
            raise StagingError("None of the validation snapshots carries a label")
        vx, vy, vex, vey = _design(
            graph, v_snapshots, v_labels, v_contexts,
            cc_table, eta_table, leave_day_out=False,
        )
        core_valid, ext_valid = (vx, vy), (vex, vey)

    if context_free:
        core_names = _context_free(core_x.column_names, CONTEXT_COLUMNS_CORE)
        ext_names = _context_free(ext_x.column_names, CONTEXT_COLUMNS_EXTENDED)
        core_x, ext_x = core_x.select(core_names), ext_x.select(ext_names)
        if core_valid is not None:
            core_valid = (core_valid[0].select(core_names), core_valid[1])
            ext_valid = (ext_valid[0].select(ext_names), ext_valid[1])

    jobs = [
        (f"core.{PRESET_NAMES[i]}", core_x, core_y, core_objective, params, core_valid)
        for i, params in enumerate(presets)
    ]
    jobs.append(
        (
            f"extended.{PRESET_NAMES[len(presets) - 1]}",
            ext_x, ext_y, Objective.absolute_error(), presets[-1], ext_valid,
        )
    )

    def fit(job) -> GbdtModel:
        name, x, y, objective, params, valid = job
        if fixed_rounds is not None:
            params = params.model_copy(update={"num_rounds": fixed_rounds[name]})
            valid = None
        logger.info("Training stage-two member %s (%d rows)", name, x.rows)
        return train(x, y, objective, params, valid, log_every)

    with ThreadPoolExecutor(max_workers=max(1, n_jobs)) as pool:
        fitted = list(pool.map(fit, jobs))

    return StageTwoModel(
        city=graph.city,
        core_models=tuple(fitted[:-1]),
        extended_model=fitted[-1],
        cc_table=cc_table,
        eta_table=eta_table,
        context_free=context_free,
    )


def stage2_features(
    model: StageTwoModel,
    graph: RoadGraph,
    snapshot: CounterSnapshot,
    context: Optional[TimeContext],
    null_context: bool = False,
) -> tuple[FeatureMatrix, FeatureMatrix]:
    """Inference-time core and extended matrices in the model's column layout.

    Args:
        null_context (bool, optional): replace context-dependent columns by MISSING (the
            single-stage ablation of a normally trained model). Defaults to False.
    """
    model.check_city(graph.city)
    model.check_city(snapshot.city)
    core = build_core_features(graph, snapshot, context, model.cc_table)
    ext = build_extended_features(graph, context, model.eta_table)
    if null_context:
        core = core.with_missing(CONTEXT_COLUMNS_CORE)
        ext = ext.with_missing(CONTEXT_COLUMNS_EXTENDED)
    return core.select(model.core_feature_names), ext.select(model.extended_feature_names)


def combine_probabilities(probabilities: Sequence[np.ndarray]) -> np.ndarray:
    """Average member probability rows and renormalise them to sum to 1"""
    mean = np.mean(np.stack(probabilities), axis=0)
    return mean / mean.sum(axis=1, keepdims=True)


def predict_stage2(
    model: StageTwoModel,
    graph: RoadGraph,
    snapshot: CounterSnapshot,
    context: Optional[TimeContext],
    null_context: bool = False,
) -> tuple[np.ndarray, np.ndarray]:
    """Class probabilities per edge and ETA per super-segment.

    Args:
        model (StageTwoModel): trained heads.
        graph (RoadGraph): road graph the model was trained on.
        snapshot (CounterSnapshot): counter volumes.
        context (TimeContext): predicted context, or the true one for ablations. Ignored
            by context-free models but still required.
        null_context (bool, optional): see `stage2_features`. Defaults to False.

    Raises:
        StagingError: city mismatch or unfitted model.
        EncodingError: context is missing.

    Returns:
        tuple[np.ndarray, np.ndarray]: (n_edges, 3) probabilities and (n_supersegments,) ETAs.
    """
    if model is None:
        raise StagingError("Stage-two model is not fitted")
    core, ext = stage2_features(model, graph, snapshot, context, null_context)
    probabilities = combine_probabilities([predict(m, core) for m in model.core_models])
    etas = np.maximum(predict(model.extended_model, ext), ETA_FLOOR)
    return probabilities, etas


def predict_stage2_many(
    model: StageTwoModel,
    graph: RoadGraph,
    snapshots: Sequence[CounterSnapshot],
    contexts: Sequence[Optional[TimeContext]],
    null_context: bool = False,
) -> tuple[np.ndarray, np.ndarray]:
    """`predict_stage2` over many snapshots with one ensemble pass.

    Returns:
        tuple[np.ndarray, np.ndarray]: (n_snapshots, n_edges, 3) probabilities and
            (n_snapshots, n_supersegments) ETAs.
    """
    if model is None:
        raise StagingError("Stage-two model is not fitted")
    if len(contexts) != len(snapshots):
        raise StagingError(f"{len(contexts)} contexts for {len(snapshots)} snapshots")
    n_edges, n_segments = len(graph.edges), len(graph.supersegments)
    if not snapshots:
        return np.empty((0, n_edges, NUM_CLASSES)), np.empty((0, n_segments))
    pairs = [
        stage2_features(model, graph, s, c, null_context) for s, c in zip(snapshots, contexts)
    ]
    core = FeatureMatrix.vstack([p[0] for p in pairs])
    ext = FeatureMatrix.vstack([p[1] for p in pairs])
    probabilities = combine_probabilities([predict(m, core) for m in model.core_models])
    etas = np.maximum(predict(model.extended_model, ext), ETA_FLOOR)
    return (
        probabilities.reshape(len(snapshots), n_edges, NUM_CLASSES),
        etas.reshape(len(snapshots), n_segments),
    )


def te_baseline(
    model: StageTwoModel, graph: RoadGraph, context: TimeContext
) -> tuple[np.ndarray, np.ndarray]:
    """Encoding-only predictions: the smoothed class fractions and the mean ETA given
    (slot, day of week), with the usual fallbacks for unseen keys"""
    model.check_city(graph.city)
    probabilities = encode_edges(
        model.cc_table, ConditioningSet.SLOT_DOW, graph.edge_ids, context
    )
    etas = encode_supersegments(
        model.eta_table, ConditioningSet.SLOT_DOW, graph.supersegment_ids, context
    )
    return probabilities, np.maximum(etas, ETA_FLOOR)
