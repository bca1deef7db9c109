from pathlib import Path

import numpy as np
import pandas as pd
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from trafficboost.data.models import SnapshotLabels
from trafficboost.metrics.models import AblationCondition
from trafficboost.metrics.scores import cyclic_distance
from trafficboost.pipeline.base import BundleError, ProtocolError
from trafficboost.pipeline.bundle import bundle_bytes, load_bundle, save_bundle
from trafficboost.pipeline.commands import write_predictions
from trafficboost.pipeline.config import PipelineConfig, SyntheticSpec, desk_config
from trafficboost.pipeline.io import Dataset
from trafficboost.pipeline.protocol import (
    ablate,
    calendar_weeks,
    evaluate_condition,
    split_holdout,
    split_validation,
    train_full,
)
from trafficboost.pipeline.synthetic import generate_city
from trafficboost.staging.stage1 import predict_contexts
from trafficboost.staging.stage2 import predict_stage2


@pytest.fixture(scope="module")
def quick_config(quick_presets):
    return PipelineConfig(
        city="tiny",
        preset_a=quick_presets[0],
        preset_b=quick_presets[1],
        num_rounds=15,
        early_stopping_rounds=5,
        validation_weeks=1,
        test_weeks=1,
    )


@pytest.fixture(scope="module")
def holdout(tiny_city):
    return split_holdout(tiny_city, 1)


@pytest.fixture(scope="module")
def bundle(quick_config, holdout):
    train, _ = holdout
    return train_full(quick_config, train)


def test_calendar_weeks(tiny_city):
    weeks = calendar_weeks(tiny_city.days())
    assert len(weeks) == 4
    assert weeks == sorted(weeks)


def test_split_validation_whole_weeks(tiny_city):
    train, valid = split_validation(tiny_city, 1, seed=3)
    assert len(train) == 21 and len(valid) == 7
    assert len(calendar_weeks(valid)) == 1
    assert not set(train) & set(valid)
    assert split_validation(tiny_city, 1, seed=3) == (train, valid)


def test_split_validation_scattered_weeks(tiny_city):
    train, valid = split_validation(tiny_city, 2, seed=0, contiguous=False)
    assert len(train) == len(valid) == 14
    assert len(calendar_weeks(valid)) == 2


def test_split_validation_contiguous_block(tiny_city):
    for seed in range(5):
        _, valid = split_validation(tiny_city, 2, seed=seed)
        (y0, w0), (y1, w1) = calendar_weeks(valid)
        assert (y1, w1) == (y0, w0 + 1)


def test_split_validation_needs_spare_weeks(tiny_city):
    with pytest.raises(ProtocolError):
        split_validation(tiny_city, 4, seed=0)


def test_split_holdout(tiny_city, holdout):
    train, test = holdout
    assert len(train.days()) == 21 and len(test.days()) == 7
    assert max(train.days()) < min(test.days())
    everything, nothing = split_holdout(tiny_city, 0)
    assert len(everything.snapshots) == len(tiny_city.snapshots)
    assert not nothing.snapshots
    with pytest.raises(ProtocolError):
        split_holdout(tiny_city, 4)


def test_full_retrain_replays_best_rounds(bundle, holdout, quick_config):
    train, _ = holdout
    members = {**bundle.stage1.members(), **bundle.stage2.members()}
    assert set(members) == set(bundle.best_rounds)
    assert len(members) == 9
    for name, model in members.items():
        assert 1 <= bundle.best_rounds[name] <= quick_config.num_rounds
        assert model.num_rounds_trained == bundle.best_rounds[name]
    assert len(bundle.validation_days) == 7
    assert set(bundle.validation_days) <= set(train.days())
    assert bundle.config_digest == quick_config.config_digest()


def test_bundle_round_trip(tmp_path, bundle, holdout):
    _, test = holdout
    path = tmp_path / "tiny.bundle"
    save_bundle(bundle, path)
    restored = load_bundle(path, expected_digest=bundle.config_digest)
    assert restored.best_rounds == bundle.best_rounds
    assert restored.validation_days == bundle.validation_days
    assert bundle_bytes(restored) == bundle_bytes(bundle)

    contexts = predict_contexts(restored.stage1, test.snapshots)
    assert contexts == predict_contexts(bundle.stage1, test.snapshots)
    snapshot = test.snapshots[0]
    for a, b in zip(
        predict_stage2(restored.stage2, test.graph, snapshot, contexts[0]),
        predict_stage2(bundle.stage2, test.graph, snapshot, contexts[0]),
    ):
        assert_array_equal(a, b)


def test_bundle_bytes_are_deterministic(bundle):
    assert bundle_bytes(bundle) == bundle_bytes(bundle)


def test_bundle_errors(tmp_path, bundle):
    path = tmp_path / "tiny.bundle"
    with pytest.raises(BundleError, match="train"):
        load_bundle(path)
    save_bundle(bundle, path)
    with pytest.raises(BundleError, match="config"):
        load_bundle(path, expected_digest="0" * 64)
    path.write_bytes(b"not a zip")
    with pytest.raises(BundleError):
        load_bundle(path)


def test_write_predictions(tmp_path, bundle, holdout):
    _, test = holdout
    snapshots = list(test.snapshots[:2])
    paths = write_predictions(bundle, test.graph, snapshots, tmp_path)
    contexts, core, extended = (pd.read_csv(p) for p in paths)
    assert list(contexts["snapshot_id"]) == [s.snapshot_id for s in snapshots]
    assert len(core) == 2 * len(test.graph.edges)
    assert_allclose(core[["p_red", "p_yellow", "p_green"]].sum(axis=1), 1.0)
    assert set(core["argmax"]) <= {"red", "yellow", "green"}
    assert len(extended) == 2 * len(test.graph.supersegments)
    assert (extended["eta_seconds"] >= 1.0).all()


def test_evaluate_two_stage(bundle, holdout):
    _, test = holdout
    report = evaluate_condition(bundle, test)
    assert report.snapshots == len(test.snapshots)
    assert report.core_loss > 0
    assert report.extended_mae >= 0
    assert set(report.stage1) == {"month", "day_of_week", "slot"}
    assert 0 < report.labelled_snapshots <= report.snapshots
    assert report.core_rows + report.core_ignored == report.labelled_snapshots * len(
        test.graph.edges
    )


def test_evaluate_needs_held_out_snapshots(bundle, tiny_city):
    _, nothing = split_holdout(tiny_city, 0)
    with pytest.raises(ProtocolError):
        evaluate_condition(bundle, nothing)


def test_retrained_condition_needs_its_model(bundle, holdout):
    _, test = holdout
    with pytest.raises(ProtocolError):
        evaluate_condition(bundle, test, AblationCondition.SINGLE_STAGE_RETRAINED)


@pytest.mark.slow
def test_ablation_report(quick_config, bundle, holdout):
    train, test = holdout
    report = ablate(quick_config, bundle, train, test)
    assert set(report.conditions) == set(AblationCondition)
    assert report.conditions[AblationCondition.GROUND_TRUTH].stage1 == {}
    two_stage = report.conditions[AblationCondition.TWO_STAGE].core_loss
    truth = report.conditions[AblationCondition.GROUND_TRUTH].core_loss
    expected = (two_stage - truth) / two_stage
    assert report.deltas["ground_truth.core_loss"] == pytest.approx(expected)


@pytest.mark.slow
def test_stage_one_beats_constant_slot(quick_config, holdout):
    train, test = holdout
    config = quick_config.model_copy(update={"num_rounds": 60, "early_stopping_rounds": 15})
    bundle = train_full(config, train)
    predicted = predict_contexts(bundle.stage1, test.snapshots)
    truth = np.array([s.true_context.slot for s in test.snapshots])
    model_mad = np.mean([cyclic_distance(p.slot, t, 96) for p, t in zip(predicted, truth)])
    constant = int(np.median(truth))
    constant_mad = np.mean([cyclic_distance(constant, t, 96) for t in truth])
    assert model_mad < constant_mad
    # a balanced-weight model should beat the uniform class distribution
    report = evaluate_condition(bundle, test, predicted=predicted)
    assert report.core_loss < np.log(3)


def test_evaluate_skips_unlabelled_snapshots(bundle, holdout):
    _, test = holdout
    cleared = tuple(
        SnapshotLabels(snapshot_id=labels.snapshot_id) if i % 2 else labels
        for i, labels in enumerate(test.labels)
    )
    partial = Dataset(graph=test.graph, snapshots=test.snapshots, labels=cleared)
    full = evaluate_condition(bundle, test)
    report = evaluate_condition(bundle, partial)
    assert report.snapshots == full.snapshots
    assert report.labelled_snapshots == sum(labels.has_labels for labels in cleared)
    assert report.stage1 == full.stage1
    assert report.core_rows < full.core_rows


@pytest.mark.slow
@pytest.mark.parametrize("noise, accuracy", [(0.1, 0.8), (0.0, 0.95)])
def test_stage_one_recovers_the_slot(noise, accuracy):
    spec = SyntheticSpec(noise=noise)
    config = desk_config(spec, Path("data"), Path("out"))
    train, test = split_holdout(generate_city(spec), config.test_weeks)
    bundle = train_full(config, train)
    report = evaluate_condition(bundle, test)
    assert report.stage1["slot"].accuracy > accuracy
    assert report.stage1["slot"].mad < 2.0


@pytest.mark.slow
def test_two_stage_beats_single_stage_across_seeds():
    wins = grounded = 0
    for seed in range(10):
        spec = SyntheticSpec(seed=seed)
        config = desk_config(spec, Path("data"), Path("out"))
        train, test = split_holdout(generate_city(spec), config.test_weeks)
        bundle = train_full(config, train)
        scores = ablate(config, bundle, train, test).conditions
        two_stage = scores[AblationCondition.TWO_STAGE]
        single = [
            scores[AblationCondition.SINGLE_STAGE_NULLED],
            scores[AblationCondition.SINGLE_STAGE_RETRAINED],
        ]
        wins += all(
            two_stage.core_loss < s.core_loss and two_stage.extended_mae < s.extended_mae
            for s in single
        )
        grounded += scores[AblationCondition.GROUND_TRUTH].core_loss <= two_stage.core_loss
    assert wins >= 9
    assert grounded == 10
