import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from trafficboost.data.models import IGNORE, CongestionLabel, TimeContext
from trafficboost.encoding.base import EncodingError
from trafficboost.encoding.features import CONTEXT_COLUMNS_CORE, CONTEXT_COLUMNS_EXTENDED
from trafficboost.staging.base import StagingError
from trafficboost.staging.models import StageTarget
from trafficboost.staging.stage1 import (
    combine_predictions,
    predict_context,
    predict_contexts,
    round_half_away,
    stage1_feature_names,
    train_stage1,
)
from trafficboost.staging.stage2 import (
    combine_probabilities,
    predict_stage2,
    te_baseline,
    train_stage2,
)


@pytest.fixture(scope="module")
def split_city(tiny_city):
    days = tiny_city.days()
    return tiny_city.on_days(days[:21]), tiny_city.on_days(days[21:])


@pytest.fixture(scope="module")
def stage1_model(split_city, quick_presets):
    train, _ = split_city
    return train_stage1(train.snapshots, train.graph, quick_presets)


@pytest.fixture(scope="module")
def stage2_model(split_city, quick_presets):
    train, valid = split_city
    return train_stage2(
        train.labels,
        train.graph,
        train.snapshots,
        presets=quick_presets,
        validation=(valid.snapshots, valid.labels),
    )


def test_stage1_feature_layout():
    assert stage1_feature_names([7, 3]) == (
        "node3_lag15",
        "node3_lag30",
        "node3_lag45",
        "node3_lag60",
        "node7_lag15",
        "node7_lag30",
        "node7_lag45",
        "node7_lag60",
    )


def test_round_half_away_from_zero():
    assert_array_equal(round_half_away([0.5, 1.5, 2.5, -0.5, -2.5, 0.49]), [1, 2, 3, -1, -3, 0])


def test_combine_predictions_clamps():
    out = combine_predictions(StageTarget.SLOT, [np.array([95.6, -3.0]), np.array([96.2, 0.0])])
    assert_array_equal(out, [95, 0])
    month = combine_predictions(StageTarget.MONTH, [np.array([0.2, 6.5])])
    assert_array_equal(month, [1, 7])


def test_stage1_members(stage1_model, tiny_city):
    assert set(stage1_model.members()) == {
        "month.a",
        "month.b",
        "day_of_week.a",
        "day_of_week.b",
        "slot.a",
        "slot.b",
    }
    assert stage1_model.counter_ids == tuple(tiny_city.graph.counter_ids)
    assert len(stage1_model.feature_names) == 4 * len(tiny_city.graph.counter_ids)


def test_stage1_predictions_are_valid_contexts(stage1_model, split_city):
    _, valid = split_city
    contexts = predict_contexts(stage1_model, valid.snapshots)
    assert len(contexts) == len(valid.snapshots)
    for ctx in contexts:
        assert 1 <= ctx.month <= 12
        assert 0 <= ctx.day_of_week <= 6
        assert 0 <= ctx.slot <= 95
    assert predict_context(stage1_model, valid.snapshots[0]) == contexts[0]
    assert predict_contexts(stage1_model, []) == []


def test_stage1_fixed_rounds(split_city, quick_presets):
    train, _ = split_city
    rounds = {f"{t.value}.{p}": 3 if p == "a" else 2 for t in StageTarget for p in ("a", "b")}
    model = train_stage1(train.snapshots, train.graph, quick_presets, fixed_rounds=rounds)
    assert model.best_rounds() == rounds
    for name, member in model.members().items():
        assert member.num_rounds_trained == rounds[name]


def test_stage1_rejects_foreign_snapshots(stage1_model, split_city):
    _, valid = split_city
    foreign = valid.snapshots[0].model_copy(update={"city": "elsewhere"})
    with pytest.raises(StagingError):
        predict_contexts(stage1_model, [foreign])


def test_stage1_needs_contexts(split_city, quick_presets):
    train, _ = split_city
    blind = [s.model_copy(update={"true_context": None}) for s in train.snapshots]
    with pytest.raises(StagingError):
        train_stage1(blind, train.graph, quick_presets)
    with pytest.raises(StagingError):
        train_stage1([], train.graph, quick_presets)


def test_stage2_members_and_rounds(stage2_model, quick_presets):
    assert set(stage2_model.members()) == {"core.a", "core.b", "extended.b"}
    for rounds in stage2_model.best_rounds().values():
        assert 1 <= rounds <= quick_presets[0].num_rounds
    assert not stage2_model.context_free


def test_stage2_predictions(stage2_model, split_city):
    _, valid = split_city
    graph, snapshot = valid.graph, valid.snapshots[0]
    probs, etas = predict_stage2(stage2_model, graph, snapshot, snapshot.true_context)
    assert probs.shape == (len(graph.edges), 3)
    assert_allclose(probs.sum(axis=1), 1.0)
    assert etas.shape == (len(graph.supersegments),)
    assert np.all(etas >= 1.0)

    nulled, _ = predict_stage2(
        stage2_model, graph, snapshot, snapshot.true_context, null_context=True
    )
    assert_allclose(nulled.sum(axis=1), 1.0)

    with pytest.raises(EncodingError):
        predict_stage2(stage2_model, graph, snapshot, None)


def test_stage2_context_free(split_city, quick_presets):
    train, _ = split_city
    model = train_stage2(
        train.labels, train.graph, train.snapshots, presets=quick_presets, context_free=True
    )
    assert model.context_free
    assert not set(model.core_feature_names) & set(CONTEXT_COLUMNS_CORE)
    assert not set(model.extended_feature_names) & set(CONTEXT_COLUMNS_EXTENDED)
    snapshot = train.snapshots[0]
    moved = TimeContext(month=7, day_of_week=6, slot=3)
    a, ea = predict_stage2(model, train.graph, snapshot, snapshot.true_context)
    b, eb = predict_stage2(model, train.graph, snapshot, moved)
    assert_allclose(a, b)
    assert_allclose(ea, eb)


def test_stage2_missing_class(split_city, quick_presets):
    train, _ = split_city
    labels = [
        lab.model_copy(
            update={
                "congestion": [
                    CongestionLabel(edge_id=c.edge_id, cc=IGNORE if c.cc == 1 else c.cc)
                    for c in lab.congestion
                ]
            }
        )
        for lab in train.labels
    ]
    with pytest.raises(StagingError, match="weight"):
        train_stage2(labels, train.graph, train.snapshots, presets=quick_presets)
    model = train_stage2(
        labels,
        train.graph,
        train.snapshots,
        presets=quick_presets,
        fixed_rounds={"core.a": 2, "core.b": 2, "extended.b": 2},
        class_weights=(1.0, 1.0, 1.0),
    )
    assert model.best_rounds() == {"core.a": 2, "core.b": 2, "extended.b": 2}


def test_te_baseline(stage2_model, split_city):
    _, valid = split_city
    graph = valid.graph
    probs, etas = te_baseline(stage2_model, graph, valid.snapshots[0].true_context)
    assert probs.shape == (len(graph.edges), 3)
    assert_allclose(probs.sum(axis=1), 1.0)
    assert np.all(etas >= 1.0)


def test_combine_probabilities():
    a = np.array([[0.2, 0.3, 0.5]])
    b = np.array([[0.4, 0.4, 0.2]])
    assert_allclose(combine_probabilities([a, b]), [[0.3, 0.35, 0.35]])
