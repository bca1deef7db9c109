import pytest
from numpy.testing import assert_array_equal

from trafficboost.data.models import IGNORE, CongestionLabel, EtaLabel, SnapshotLabels
from trafficboost.pipeline.base import IngestError
from trafficboost.pipeline.io import (
    CORE_LABEL_COLUMNS,
    SNAPSHOT_COLUMNS,
    Dataset,
    read_dataset,
    read_graph,
    read_labels,
    read_snapshots,
    write_dataset,
)


@pytest.fixture
def toy_dir(tmp_path, toy_graph, toy_snapshot):
    labels = SnapshotLabels(
        snapshot_id=toy_snapshot.snapshot_id,
        congestion=[CongestionLabel(edge_id=10, cc=0), CongestionLabel(edge_id=11, cc=IGNORE)],
        eta=[EtaLabel(supersegment_id=100, eta=65.5)],
    )
    write_dataset(
        Dataset(graph=toy_graph, snapshots=(toy_snapshot,), labels=(labels,)), tmp_path
    )
    return tmp_path


def _write(path, header, *rows):
    path.write_text("\n".join([",".join(header), *rows]) + "\n")


def test_toy_round_trip(toy_dir, toy_graph, toy_snapshot):
    dataset = read_dataset(toy_dir, "toy")
    assert dataset.graph == toy_graph
    assert dataset.snapshots == (toy_snapshot,)
    labels = dataset.labels[0]
    assert [(c.edge_id, c.cc) for c in labels.congestion] == [(10, 0), (11, IGNORE)]
    assert labels.eta == [EtaLabel(supersegment_id=100, eta=65.5)]
    assert "ignore" in (toy_dir / "core_labels.csv").read_text()


def test_generated_city_round_trip(tmp_path, tiny_city):
    write_dataset(tiny_city, tmp_path)
    dataset = read_dataset(tmp_path, tiny_city.graph.city)
    assert dataset.graph == tiny_city.graph
    assert dataset.snapshots == tiny_city.snapshots
    for read, original in zip(dataset.labels, tiny_city.labels):
        assert_array_equal(
            read.congestion_vector(dataset.graph), original.congestion_vector(tiny_city.graph)
        )
        assert_array_equal(read.eta_vector(dataset.graph), original.eta_vector(tiny_city.graph))


def test_dataset_day_subsets(tiny_city):
    days = tiny_city.days()
    assert len(days) == 28
    subset = tiny_city.on_days(days[:2])
    assert subset.days() == days[:2]
    assert len(subset.snapshots) == len(subset.labels) == 6
    assert all(s.snapshot_id == lab.snapshot_id for s, lab in zip(subset.snapshots, subset.labels))


def test_missing_file(tmp_path, toy_graph):
    with pytest.raises(IngestError, match="file not found") as e:
        read_snapshots(tmp_path / "snapshots.csv", toy_graph)
    assert e.value.line is None


@pytest.mark.parametrize(
    "rows, line, message",
    [
        (["2021-03-03,96,1,1,2,3,4"], 2, "slot"),
        (["2021-03-03,40,1,1,2,3,4", "2021-03-03,40,1,5,6,7,8"], 3, "duplicate"),
        (["2021-03-03,40,3,1,2,3,4", "2021-03-03,40,2,1,2,3,4"], 3, "not a counter"),
        (["2021-03-03,40,1,1,-2,3,4"], 2, "non-negative"),
        (["2021-03-03,40,1,1,x,3,4"], 2, "lag30"),
        (["03/03/2021,40,1,1,2,3,4"], 2, "date"),
    ],
)
def test_snapshot_errors_name_the_line(tmp_path, toy_graph, rows, line, message):
    path = tmp_path / "snapshots.csv"
    _write(path, SNAPSHOT_COLUMNS, *rows)
    with pytest.raises(IngestError, match=message) as e:
        read_snapshots(path, toy_graph)
    assert e.value.line == line
    assert f"snapshots.csv:{line}" in str(e.value)


def test_snapshot_missing_column(tmp_path, toy_graph):
    path = tmp_path / "snapshots.csv"
    _write(path, ("date", "slot", "node_id", "lag15"), "2021-03-03,40,1,1")
    with pytest.raises(IngestError, match="missing columns"):
        read_snapshots(path, toy_graph)


def test_duplicate_node_reports_second_occurrence(toy_dir):
    _write(toy_dir / "nodes.csv", ("id", "is_counter"), "1,1", "2,0", "3,true", "4,0", "2,0")
    with pytest.raises(IngestError, match="duplicate") as e:
        read_graph(toy_dir, "toy")
    assert e.value.line == 6
    assert e.value.path.name == "nodes.csv"


def test_dangling_edge(toy_dir):
    edges = (toy_dir / "edges.csv").read_text().splitlines()
    edges[1] = edges[1].replace("10,1,2,", "10,1,9,", 1)
    (toy_dir / "edges.csv").write_text("\n".join(edges) + "\n")
    with pytest.raises(IngestError, match="absent node") as e:
        read_graph(toy_dir, "toy")
    assert e.value.line == 2


def test_broken_supersegment(toy_dir):
    _write(toy_dir / "supersegments.csv", ("id", "node_path"), "100,1 2 3", "101,4 3")
    with pytest.raises(IngestError, match="without an edge") as e:
        read_graph(toy_dir, "toy")
    assert e.value.line == 3


@pytest.mark.parametrize(
    "rows, line, message",
    [
        (["2021-03-03,40,10,red", "2021-03-03,40,99,green"], 3, "unknown edge"),
        (["2021-03-03,40,10,purple"], 2, "class"),
        (["2021-03-03,40,10,red", "2021-03-03,40,10,green"], 3, "duplicate"),
        (["2021-03-03,40,10,red", "2021-03-04,40,10,green"], 3, "no counter snapshot"),
    ],
)
def test_label_errors_name_the_line(toy_dir, toy_graph, toy_snapshot, rows, line, message):
    _write(toy_dir / "core_labels.csv", CORE_LABEL_COLUMNS, *rows)
    with pytest.raises(IngestError, match=message) as e:
        read_labels(toy_dir, toy_graph, [toy_snapshot])
    assert e.value.line == line


def test_unlabelled_snapshot_gets_empty_labels(toy_dir, toy_graph, toy_snapshot):
    _write(toy_dir / "core_labels.csv", CORE_LABEL_COLUMNS)
    _write(toy_dir / "eta_labels.csv", ("date", "slot", "supersegment_id", "eta_seconds"))
    labels = read_labels(toy_dir, toy_graph, [toy_snapshot])
    assert labels[0].congestion == [] and labels[0].eta == []
    assert_array_equal(labels[0].congestion_vector(toy_graph), [IGNORE] * 4)
