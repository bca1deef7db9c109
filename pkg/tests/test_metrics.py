import numpy as np
import pytest
from numpy.testing import assert_allclose

from trafficboost.data.models import IGNORE, TimeContext
from trafficboost.metrics.base import MetricError
from trafficboost.metrics.models import AblationCondition, AblationReport, EvalReport
from trafficboost.metrics.scores import (
    core_metric,
    cyclic_distance,
    evaluation_class_weights,
    extended_metric,
    stage1_metric,
)


def test_core_metric_hand_example():
    p = np.array([[0.7, 0.2, 0.1], [0.2, 0.6, 0.2], [0.1, 0.1, 0.8]])
    y = [0, 1, IGNORE]
    assert core_metric(p, y, epsilon=0.0) == pytest.approx(-(np.log(0.7) + np.log(0.6)) / 2)


def test_core_metric_explicit_weights():
    p = np.array([[0.5, 0.25, 0.25], [0.25, 0.25, 0.5]])
    loss = core_metric(p, [0, 2], class_weights=[3.0, 1.0, 1.0], epsilon=0.0)
    assert loss == pytest.approx(-np.log(0.5))


def test_evaluation_weights_zero_for_absent_classes():
    assert_allclose(evaluation_class_weights([0, 0, 1, IGNORE]), [0.5, 1.0, 0.0])


def test_core_metric_errors():
    with pytest.raises(MetricError):
        core_metric(np.full((2, 3), 1 / 3), [IGNORE, IGNORE])
    with pytest.raises(MetricError):
        core_metric(np.full((2, 3), 1 / 3), [0, 1, 2])


def test_extended_metric():
    assert extended_metric([10.0, 20.0, 33.0], [12.0, 20.0, 30.0]) == pytest.approx(5 / 3)
    with pytest.raises(MetricError):
        extended_metric([], [])
    with pytest.raises(MetricError):
        extended_metric([1.0], [1.0, 2.0])


@pytest.mark.parametrize(
    "a, b, period, expected",
    [(95, 0, 96, 1), (0, 48, 96, 48), (6, 0, 7, 1), (12, 1, 12, 1), (3, 3, 7, 0)],
)
def test_cyclic_distance(a, b, period, expected):
    assert cyclic_distance(a, b, period) == expected


def test_stage1_metric():
    truth = [
        TimeContext(month=1, day_of_week=0, slot=0),
        TimeContext(month=6, day_of_week=3, slot=50),
    ]
    predicted = [
        TimeContext(month=12, day_of_week=0, slot=95),
        TimeContext(month=6, day_of_week=5, slot=50),
    ]
    scores = stage1_metric(predicted, truth)
    assert scores["slot"].accuracy == 0.5
    assert scores["slot"].mad == pytest.approx(0.5)
    assert scores["month"].mad == pytest.approx(0.5)
    assert scores["day_of_week"].accuracy == 0.5
    assert scores["day_of_week"].mad == pytest.approx(1.0)
    with pytest.raises(MetricError):
        stage1_metric([], [])
    with pytest.raises(MetricError):
        stage1_metric(predicted, truth[:1])


def test_eval_report_flattens():
    truth = [TimeContext(month=1, day_of_week=0, slot=0)]
    report = EvalReport(core_loss=0.5, stage1=stage1_metric(truth, truth), snapshots=1)
    flat = report.to_flat()
    assert flat["core_loss"] == 0.5
    assert flat["extended_mae"] is None
    assert flat["stage1.slot.accuracy"] == 1.0


def test_ablation_deltas_sign_convention():
    report = AblationReport(
        conditions={
            AblationCondition.TWO_STAGE: EvalReport(core_loss=1.0, extended_mae=50.0),
            AblationCondition.SINGLE_STAGE_NULLED: EvalReport(core_loss=1.2, extended_mae=60.0),
            AblationCondition.GROUND_TRUTH: EvalReport(core_loss=0.9, extended_mae=None),
        }
    )
    deltas = report.deltas
    assert deltas["single_stage_nulled.core_loss"] == pytest.approx(0.2)
    assert deltas["single_stage_nulled.extended_mae"] == pytest.approx(0.2)
    assert deltas["ground_truth.core_loss"] == pytest.approx(0.1)
    assert deltas["ground_truth.extended_mae"] is None
    assert "two_stage.core_loss" not in deltas
    flat = report.to_flat()
    assert flat["two_stage.core_loss"] == 1.0
    assert flat["delta.ground_truth.core_loss"] == pytest.approx(0.1)
    assert "deltas" in report.model_dump()
