from datetime import date

import pytest

from trafficboost.data.models import (
    CounterSnapshot,
    Edge,
    EdgeAttributes,
    Node,
    RoadGraph,
    SuperSegment,
    TimeContext,
)
from trafficboost.gbdt.models import GbdtParams
from trafficboost.pipeline.config import SyntheticSpec
from trafficboost.pipeline.synthetic import generate_city


def make_attributes(**overrides) -> EdgeAttributes:
    values = dict(
        oneway=False,
        tunnel=False,
        highway_class=2,
        speed_kph=40.0,
        maxspeed=50.0,
        lanes=2,
        length_m=120.0,
        highway_importance=0.1,
        counter_distance_hops=None,
    )
    values.update(overrides)
    return EdgeAttributes(**values)


@pytest.fixture
def toy_graph() -> RoadGraph:
    """1 -> 2 -> 3 -> 4 with a return arc 2 -> 1; counters at 1 and 3"""
    nodes = (
        Node(id=1, is_counter=True),
        Node(id=2),
        Node(id=3, is_counter=True),
        Node(id=4),
    )
    edges = (
        Edge(id=10, source=1, sink=2, attributes=make_attributes()),
        Edge(id=11, source=2, sink=3, attributes=make_attributes(oneway=True)),
        Edge(id=12, source=3, sink=4, attributes=make_attributes(tunnel=True)),
        Edge(id=13, source=2, sink=1, attributes=make_attributes()),
    )
    segments = (SuperSegment(id=100, node_path=(1, 2, 3)), SuperSegment(id=101, node_path=(3, 4)))
    return RoadGraph(city="toy", nodes=nodes, edges=edges, supersegments=segments)


@pytest.fixture
def toy_snapshot() -> CounterSnapshot:
    day = date(2021, 3, 3)
    return CounterSnapshot(
        snapshot_id="2021-03-03T40",
        city="toy",
        day=day,
        true_context=TimeContext.from_timestamp(day, 40),
        volumes={1: (10.0, 12.0, None, 9.0), 3: (30.0, 31.0, 29.0, 28.0)},
    )


@pytest.fixture(scope="session")
def tiny_spec() -> SyntheticSpec:
    return SyntheticSpec(
        city="tiny",
        n_nodes=12,
        neighbours=4,
        n_counters=4,
        n_supersegments=4,
        supersegment_nodes=(2, 4),
        weeks=4,
        snapshots_per_day=3,
        seed=7,
    )


@pytest.fixture(scope="session")
def tiny_city(tiny_spec):
    return generate_city(tiny_spec)


@pytest.fixture(scope="session")
def quick_presets() -> tuple[GbdtParams, GbdtParams]:
    common = dict(
        max_depth=3,
        num_rounds=15,
        early_stopping_rounds=5,
        min_samples_leaf=5,
        histogram_bins=32,
    )
    return (
        GbdtParams(learning_rate=0.3, subsample=0.8, colsample_bytree=0.9, seed=0, **common),
        GbdtParams(learning_rate=0.3, seed=1, **common),
    )
