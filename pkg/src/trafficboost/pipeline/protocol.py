"""
Training and evaluation protocol: calendar-week splits, early stopping against the
validation weeks, full-data retraining for the recorded rounds, and held-out evaluation.
"""

import logging
from datetime import date
from typing import Optional, Sequence

import numpy as np

from ..data.models import IGNORE, NUM_CLASSES, TimeContext
from ..metrics.base import MetricError
from ..metrics.models import AblationCondition, AblationReport, EvalReport
from ..metrics.scores import core_metric, extended_metric, stage1_metric
from ..staging.models import StageTwoModel
from ..staging.stage1 import predict_contexts, train_stage1
from ..staging.stage2 import predict_stage2_many, te_baseline, train_stage2
from .base import ProtocolError
from .bundle import ModelBundle
from .config import PipelineConfig
from .io import Dataset

logger = logging.getLogger(__name__)


def calendar_weeks(days: Sequence[date]) -> list[tuple[int, int]]:
    """Sorted distinct ISO (year, week) pairs covering `days`"""
    return sorted({d.isocalendar()[:2] for d in days})


def _days_in(days: Sequence[date], weeks: set[tuple[int, int]]) -> list[date]:
    return [d for d in days if d.isocalendar()[:2] in weeks]


def split_validation(
    dataset: Dataset, validation_weeks: int, seed: int, contiguous: bool = True
) -> tuple[list[date], list[date]]:
    """Pick whole calendar weeks for validation uniformly at random.

    Args:
        dataset (Dataset): training data.
        validation_weeks (int): number of calendar weeks held out.
        seed (int): split seed; equal seeds give equal splits.
        contiguous (bool, optional): pick one block of consecutive weeks instead of
            independent weeks. Defaults to True.

    Raises:
        ProtocolError: the data does not span more than `validation_weeks` weeks.

    Returns:
        tuple[list[date], list[date]]: sorted (training days, validation days).
    """
    days = dataset.days()
    weeks = calendar_weeks(days)
    if validation_weeks < 1 or len(weeks) <= validation_weeks:
        raise ProtocolError(
            f"Data spans {len(weeks)} calendar week(s); cannot hold out {validation_weeks}"
        )
    rng = np.random.default_rng(seed)
    if contiguous:
        start = int(rng.integers(len(weeks) - validation_weeks + 1))
        chosen = weeks[start : start + validation_weeks]
    else:
        picks = rng.choice(len(weeks), size=validation_weeks, replace=False)
        chosen = [weeks[i] for i in sorted(picks.tolist())]
    valid = _days_in(days, set(chosen))
    held = set(valid)
    train = [d for d in days if d not in held]
    logger.info(
        "Validation weeks %s: %d training days, %d validation days",
        [f"{y}-W{w:02d}" for y, w in chosen], len(train), len(valid),
    )
    return train, valid


def split_holdout(dataset: Dataset, test_weeks: int) -> tuple[Dataset, Dataset]:
    """Hold out the final `test_weeks` calendar weeks.

    Raises:
        ProtocolError: no calendar week would remain for training.
    """
    days = dataset.days()
    weeks = calendar_weeks(days)
    if len(weeks) <= test_weeks:
        raise ProtocolError(
            f"Data spans {len(weeks)} calendar week(s); cannot hold out {test_weeks} for testing"
        )
    held = set(weeks[len(weeks) - test_weeks :]) if test_weeks else set()
    test = set(_days_in(days, held))
    return dataset.on_days(d for d in days if d not in test), dataset.on_days(sorted(test))


def _train_stage2(
    config: PipelineConfig,
    dataset: Dataset,
    validation: Optional[Dataset],
    fixed_rounds: Optional[dict[str, int]],
    context_free: bool,
) -> StageTwoModel:
    return train_stage2(
        dataset.labels,
        dataset.graph,
        dataset.snapshots,
        presets=config.presets(),
        pseudocount=config.pseudocount,
        validation=None if validation is None else (validation.snapshots, validation.labels),
        fixed_rounds=fixed_rounds,
        context_free=context_free,
        n_jobs=config.n_jobs,
        log_every=config.log_every,
    )


def train_full(config: PipelineConfig, dataset: Dataset) -> ModelBundle:
    """Two-phase training of both stages.

    Phase one trains every member with early stopping against the validation weeks and
    records its best round; phase two retrains every member on training plus validation
    days for exactly that many rounds.

    Raises:
        ProtocolError: the data cannot be split.
        StagingError: missing contexts, labels or classes.
    """
    train_days, valid_days = split_validation(
        dataset, config.validation_weeks, config.seed, config.contiguous_validation
    )
    train, valid = dataset.on_days(train_days), dataset.on_days(valid_days)
    presets = config.presets()

    logger.info("Phase 1: early stopping on %d validation snapshots", len(valid.snapshots))
    stage1 = train_stage1(
        train.snapshots, dataset.graph, presets, validation=valid.snapshots,
        n_jobs=config.n_jobs, log_every=config.log_every,
    )
    stage2 = _train_stage2(config, train, valid, None, context_free=False)
    best_rounds = {**stage1.best_rounds(), **stage2.best_rounds()}
    for name, rounds in best_rounds.items():
        logger.info("Best round of %s: %d", name, rounds)

    logger.info("Phase 2: retraining on %d snapshots", len(dataset.snapshots))
    stage1 = train_stage1(
        dataset.snapshots, dataset.graph, presets, fixed_rounds=stage1.best_rounds(),
        n_jobs=config.n_jobs, log_every=config.log_every,
    )
    stage2 = _train_stage2(config, dataset, None, stage2.best_rounds(), context_free=False)
    return ModelBundle(
        city=dataset.graph.city,
        config_digest=config.config_digest(),
        stage1=stage1,
        stage2=stage2,
        best_rounds=best_rounds,
        validation_days=tuple(valid_days),
    )


def train_context_free(config: PipelineConfig, dataset: Dataset) -> StageTwoModel:
    """Stage two without any context-dependent column, under the same two-phase protocol"""
    train_days, valid_days = split_validation(
        dataset, config.validation_weeks, config.seed, config.contiguous_validation
    )
    phase1 = _train_stage2(
        config, dataset.on_days(train_days), dataset.on_days(valid_days), None, context_free=True
    )
    return _train_stage2(config, dataset, None, phase1.best_rounds(), context_free=True)


def _require_labels(test: Dataset) -> None:
    if not test.snapshots:
        raise ProtocolError("No held-out snapshots to evaluate; set test_weeks >= 1")
    if not any(labels.has_labels for labels in test.labels):
        raise ProtocolError("Held-out snapshots carry no congestion or ETA labels")


def evaluate_condition(
    bundle: ModelBundle,
    test: Dataset,
    condition: AblationCondition = AblationCondition.TWO_STAGE,
    context_free_model: Optional[StageTwoModel] = None,
    predicted: Optional[list[TimeContext]] = None,
) -> EvalReport:
    """Score one evaluation condition on held-out snapshots.

    Stage one is scored on every snapshot, stage two on the snapshots that carry labels.

    Args:
        bundle (ModelBundle): trained models.
        test (Dataset): held-out snapshots with labels and true contexts.
        condition (AblationCondition, optional): how contexts and models are combined.
            Defaults to the two-stage pipeline.
        context_free_model (StageTwoModel, optional): required by the retrained
            single-stage condition. Defaults to None.
        predicted (list[TimeContext], optional): stage-one contexts of `test`, computed
            when omitted. Defaults to None.

    Raises:
        ProtocolError: no held-out labels, or a missing context-free model.
    """
    _require_labels(test)
    graph = test.graph
    if predicted is None:
        predicted = predict_contexts(bundle.stage1, test.snapshots)
    truth = [s.true_context for s in test.snapshots]

    keep = [i for i, labels in enumerate(test.labels) if labels.has_labels]
    snapshots = [test.snapshots[i] for i in keep]
    contexts = [predicted[i] for i in keep]
    match condition:
        case AblationCondition.TWO_STAGE:
            probabilities, etas = predict_stage2_many(bundle.stage2, graph, snapshots, contexts)
        case AblationCondition.SINGLE_STAGE_NULLED:
            probabilities, etas = predict_stage2_many(
                bundle.stage2, graph, snapshots, contexts, null_context=True
            )
        case AblationCondition.SINGLE_STAGE_RETRAINED:
            if context_free_model is None:
                raise ProtocolError("The retrained single-stage condition needs its model")
            probabilities, etas = predict_stage2_many(
                context_free_model, graph, snapshots, contexts
            )
        case AblationCondition.GROUND_TRUTH:
            probabilities, etas = predict_stage2_many(
                bundle.stage2, graph, snapshots, [truth[i] for i in keep]
            )
        case AblationCondition.TE_BASELINE:
            pairs = [te_baseline(bundle.stage2, graph, context) for context in contexts]
            probabilities = np.stack([p for p, _ in pairs])
            etas = np.stack([e for _, e in pairs])

    y = np.concatenate([test.labels[i].congestion_vector(graph) for i in keep])
    eta_target = np.stack([test.labels[i].eta_vector(graph) for i in keep])
    seen = ~np.isnan(eta_target)
    labelled = int((y != IGNORE).sum())
    try:
        core_loss = (
            core_metric(probabilities.reshape(-1, NUM_CLASSES), y) if labelled else None
        )
        extended_mae = extended_metric(etas[seen], eta_target[seen]) if seen.any() else None
        stage1 = (
            {} if condition is AblationCondition.GROUND_TRUTH else stage1_metric(predicted, truth)
        )
    except MetricError as e:
        raise ProtocolError(f"Cannot score condition '{condition.value}': {e}")

    report = EvalReport(
        core_loss=core_loss,
        extended_mae=extended_mae,
        stage1=stage1,
        snapshots=len(test.snapshots),
        labelled_snapshots=len(keep),
        core_rows=labelled,
        core_ignored=int(y.size - labelled),
        extended_rows=int(seen.sum()),
    )
    logger.info(
        "%s: core loss %s, extended MAE %s",
        condition.value, report.core_loss, report.extended_mae,
    )
    return report


def ablate(
    config: PipelineConfig, bundle: ModelBundle, train: Dataset, test: Dataset
) -> AblationReport:
    """Score every ablation condition on the held-out weeks.

    The retrained single-stage model is fitted on `train` under the same protocol
    as the bundle.
    """
    _require_labels(test)
    predicted = predict_contexts(bundle.stage1, test.snapshots)
    context_free = train_context_free(config, train)
    return AblationReport(
        conditions={
            condition: evaluate_condition(bundle, test, condition, context_free, predicted)
            for condition in AblationCondition
        }
    )
