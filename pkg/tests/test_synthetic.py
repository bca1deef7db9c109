from collections import Counter

import numpy as np
import pytest

from trafficboost.data.models import SLOTS_PER_DAY
from trafficboost.pipeline.config import SyntheticSpec
from trafficboost.pipeline.synthetic import day_profile, generate_city, volume_profile


@pytest.fixture(scope="module")
def small_spec() -> SyntheticSpec:
    return SyntheticSpec(
        city="small",
        n_nodes=16,
        n_counters=6,
        n_supersegments=4,
        supersegment_nodes=(2, 4),
        weeks=2,
        labelled_per_day=5,
        seed=3,
    )


@pytest.fixture(scope="module")
def small_city(small_spec):
    return generate_city(small_spec)


def test_every_slot_of_every_day(small_spec, small_city):
    assert len(small_city.snapshots) == small_spec.days * SLOTS_PER_DAY
    per_day = Counter(s.day for s in small_city.snapshots)
    assert set(per_day.values()) == {SLOTS_PER_DAY}
    first_day = [s.true_context.slot for s in small_city.snapshots[:SLOTS_PER_DAY]]
    assert first_day == list(range(SLOTS_PER_DAY))


def test_labelled_snapshots_per_day(small_spec, small_city):
    labelled = Counter(
        s.day for s, labels in zip(small_city.snapshots, small_city.labels) if labels.has_labels
    )
    assert set(labelled.values()) == {small_spec.labelled_snapshots_per_day}
    unlabelled = [labels for labels in small_city.labels if not labels.has_labels]
    assert all(not labels.congestion and not labels.eta for labels in unlabelled)


def test_generation_is_seeded(small_spec, small_city):
    again = generate_city(small_spec)
    assert again.snapshots == small_city.snapshots
    assert again.labels == small_city.labels
    other = generate_city(small_spec.model_copy(update={"seed": 4}))
    assert other.snapshots != small_city.snapshots


def test_labelling_everything(small_spec):
    spec = small_spec.model_copy(update={"weeks": 1, "labelled_per_day": None})
    city = generate_city(spec)
    assert all(labels.has_labels for labels in city.labels)


def test_counter_rush_hours_are_spread(small_spec, small_city):
    # the busiest slot of each counter, read from lag 1 of the following slot
    busiest = {}
    for node in small_city.graph.counter_ids:
        volumes = np.array(
            [
                np.nan if s.volumes[node][0] is None else s.volumes[node][0]
                for s in small_city.snapshots
            ]
        )
        daily = np.nanmean(volumes.reshape(small_spec.days, SLOTS_PER_DAY), axis=0)
        busiest[node] = (int(np.argmax(daily)) - 1) % SLOTS_PER_DAY
    assert len(set(busiest.values())) == small_spec.n_counters


def test_volume_profile():
    slots = np.arange(SLOTS_PER_DAY)
    level = volume_profile(slots, peak_height=4.0, peak_width=3.0)
    assert int(np.argmax(level)) == 30
    assert level[30] == pytest.approx(5.0, rel=1e-3)
    assert level.min() == pytest.approx(1.0, abs=1e-3)
    assert volume_profile(0.0, peak_height=0.0) == pytest.approx(1.0)
    assert volume_profile(30.0 + SLOTS_PER_DAY) == pytest.approx(volume_profile(30.0))


def test_day_profile_peaks():
    level = day_profile(np.arange(SLOTS_PER_DAY))
    assert 28 <= int(np.argmax(level)) <= 36
    assert level.min() > 0
