"""
Delimited-text ingestion and writing of road graphs, counter snapshots and labels.

Every file has a header row; errors name the file and the 1-based line of the offending row.
"""

import io
import logging
from collections import defaultdict
from datetime import date
from pathlib import Path
from typing import Callable, Iterable, Optional, Sequence

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, ValidationError

from ..data.graph import validate_graph
from ..data.models import (
    CLASS_NAMES,
    IGNORE,
    LAG_MINUTES,
    SLOTS_PER_DAY,
    CongestionClass,
    CongestionLabel,
    CounterSnapshot,
    Edge,
    EdgeAttributes,
    EtaLabel,
    Node,
    RoadGraph,
    SnapshotLabels,
    SuperSegment,
    TimeContext,
)
from ..gbdt.serialization import atomic_write_bytes
from .base import IngestError
from .config import (
    CORE_LABELS_FILE,
    EDGES_FILE,
    ETA_LABELS_FILE,
    NODES_FILE,
    SNAPSHOTS_FILE,
    SUPERSEGMENTS_FILE,
)

logger = logging.getLogger(__name__)

# Column layouts
NODE_COLUMNS = ("id", "is_counter")
EDGE_ATTRIBUTE_COLUMNS = tuple(EdgeAttributes.model_fields)
EDGE_COLUMNS = ("id", "source", "sink", *EDGE_ATTRIBUTE_COLUMNS)
SUPERSEGMENT_COLUMNS = ("id", "node_path")
CORE_LABEL_COLUMNS = ("date", "slot", "edge_id", "class")
ETA_LABEL_COLUMNS = ("date", "slot", "supersegment_id", "eta_seconds")
LAG_COLUMNS = tuple(f"lag{m}" for m in LAG_MINUTES)
SNAPSHOT_COLUMNS = ("date", "slot", "node_id", *LAG_COLUMNS)

_TRUE = {"1", "true", "yes"}
_FALSE = {"0", "false", "no"}


class Dataset(BaseModel):
    """Road graph plus time-ordered snapshots and their aligned labels"""

    model_config = ConfigDict(frozen=True)

    graph: RoadGraph
    snapshots: tuple[CounterSnapshot, ...]
    labels: tuple[SnapshotLabels, ...]

    def days(self) -> list[date]:
        """Sorted distinct calendar days"""
        return sorted({s.day for s in self.snapshots if s.day is not None})

    def on_days(self, days: Iterable[date]) -> "Dataset":
        """Subset holding the snapshots (and labels) of `days`"""
        keep = set(days)
        pairs = [(s, lab) for s, lab in zip(self.snapshots, self.labels) if s.day in keep]
        return Dataset(
            graph=self.graph,
            snapshots=tuple(s for s, _ in pairs),
            labels=tuple(lab for _, lab in pairs),
        )


def snapshot_id(day: date, slot: int) -> str:
    return f"{day.isoformat()}T{slot}"


# Cell parsers; each raises ValueError with a readable message
def _parse_int(text: str) -> int:
    return int(text.strip())


def _parse_float(text: str) -> float:
    value = float(text.strip())
    if not np.isfinite(value):
        raise ValueError(f"expected a finite number, got: {text}")
    return value


def _parse_optional_float(text: str) -> Optional[float]:
    return None if text.strip() == "" else _parse_float(text)


def _parse_optional_int(text: str) -> Optional[int]:
    return None if text.strip() == "" else _parse_int(text)


def _parse_bool(text: str) -> bool:
    token = text.strip().lower()
    if token in _TRUE:
        return True
    if token in _FALSE:
        return False
    raise ValueError(f"expected 0/1 or true/false, got: {text}")


def _parse_date(text: str) -> date:
    return date.fromisoformat(text.strip())


def _parse_path(text: str) -> tuple[int, ...]:
    return tuple(int(tok) for tok in text.split())


def _read_table(path: Path, columns: Sequence[str]) -> pd.DataFrame:
    """Read a header-first CSV as strings; empty cells stay empty strings"""
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, skipinitialspace=True)
    except FileNotFoundError:
        raise IngestError(path, None, "file not found")
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
        raise IngestError(path, None, f"unreadable delimited text: {e}")
    missing = [c for c in columns if c not in frame.columns]
    if missing:
        raise IngestError(path, 1, f"missing columns {missing}")
    return frame


def _rows(path: Path, frame: pd.DataFrame, parsers: dict[str, Callable[[str], object]]):
    """Yield (line number, parsed row dict); the header is line 1"""
    columns = list(parsers)
    for index, values in enumerate(frame[columns].itertuples(index=False, name=None)):
        line = index + 2
        row = {}
        for column, raw in zip(columns, values):
            try:
                row[column] = parsers[column](raw)
            except ValueError as e:
                raise IngestError(path, line, f"bad {column} value '{raw}': {e}")
        yield line, row


def _check_slot(path: Path, line: int, slot: int) -> None:
    if not 0 <= slot < SLOTS_PER_DAY:
        raise IngestError(path, line, f"slot must lie in [0, {SLOTS_PER_DAY - 1}], got: {slot}")


# Graph
def read_graph(data_dir: Path, city: str) -> RoadGraph:
    """Read nodes, edges and super-segments and reject every graph violation.

    Raises:
        IngestError: malformed rows, duplicate ids, dangling edge endpoints or
            super-segment paths without edges.
    """
    data_dir = Path(data_dir)
    lines: dict[str, dict[int, list[int]]] = {
        entity: defaultdict(list) for entity in ("node", "edge", "supersegment")
    }
    files = {
        "node": data_dir / NODES_FILE,
        "edge": data_dir / EDGES_FILE,
        "supersegment": data_dir / SUPERSEGMENTS_FILE,
    }

    nodes = []
    path = files["node"]
    for line, row in _rows(
        path, _read_table(path, NODE_COLUMNS), {"id": _parse_int, "is_counter": _parse_bool}
    ):
        lines["node"][row["id"]].append(line)
        nodes.append(Node(**row))

    edge_parsers: dict[str, Callable[[str], object]] = {
        "id": _parse_int,
        "source": _parse_int,
        "sink": _parse_int,
        "oneway": _parse_bool,
        "tunnel": _parse_bool,
        "highway_class": _parse_int,
        "speed_kph": _parse_float,
        "maxspeed": _parse_float,
        "lanes": _parse_int,
        "length_m": _parse_float,
        "highway_importance": _parse_float,
        "counter_distance_hops": _parse_optional_int,
    }
    edges = []
    path = files["edge"]
    for line, row in _rows(path, _read_table(path, EDGE_COLUMNS), edge_parsers):
        lines["edge"][row["id"]].append(line)
        try:
            attributes = EdgeAttributes(**{c: row[c] for c in EDGE_ATTRIBUTE_COLUMNS})
        except ValidationError as e:
            raise IngestError(path, line, f"invalid edge attributes: {e.errors()[0]['msg']}")
        edges.append(
            Edge(id=row["id"], source=row["source"], sink=row["sink"], attributes=attributes)
        )

    segments = []
    path = files["supersegment"]
    for line, row in _rows(
        path,
        _read_table(path, SUPERSEGMENT_COLUMNS),
        {"id": _parse_int, "node_path": _parse_path},
    ):
        lines["supersegment"][row["id"]].append(line)
        try:
            segments.append(SuperSegment(**row))
        except ValidationError as e:
            raise IngestError(path, line, e.errors()[0]["msg"])

    graph = RoadGraph(
        city=city, nodes=tuple(nodes), edges=tuple(edges), supersegments=tuple(segments)
    )
    violations = validate_graph(graph)
    if violations:
        first = violations[0]
        raise IngestError(
            files[first.entity],
            _violation_line(lines[first.entity].get(first.entity_id, []), first.message),
            f"{first} ({len(violations)} graph violation(s) in total)",
        )
    logger.info(
        "Read graph '%s': %d nodes, %d edges, %d super-segments",
        city, len(nodes), len(edges), len(segments),
    )
    return graph


def _violation_line(matches: list[int], message: str) -> Optional[int]:
    """Line of the offending row; for duplicates the second occurrence"""
    if not matches:
        return None
    return matches[1] if message.startswith("duplicate") and len(matches) > 1 else matches[0]


# Snapshots and labels
def read_snapshots(path: Path, graph: RoadGraph) -> list[CounterSnapshot]:
    """Group volume rows by (date, slot) into snapshots ordered by time.

    Raises:
        IngestError: malformed rows, non-counter nodes, slots out of range or a node
            reported twice for one timestamp.
    """
    path = Path(path)
    counters = set(graph.counter_ids)
    parsers = {"date": _parse_date, "slot": _parse_int, "node_id": _parse_int}
    parsers.update({c: _parse_optional_float for c in LAG_COLUMNS})

    volumes: dict[tuple[date, int], dict[int, tuple]] = defaultdict(dict)
    for line, row in _rows(path, _read_table(path, SNAPSHOT_COLUMNS), parsers):
        _check_slot(path, line, row["slot"])
        key, node = (row["date"], row["slot"]), row["node_id"]
        if node not in counters:
            raise IngestError(path, line, f"node {node} is not a counter of '{graph.city}'")
        if node in volumes[key]:
            raise IngestError(
                path, line, f"duplicate volumes for node {node} at {snapshot_id(*key)}"
            )
        lags = tuple(row[c] for c in LAG_COLUMNS)
        if any(v is not None and v < 0 for v in lags):
            raise IngestError(path, line, "volumes must be non-negative")
        volumes[key][node] = lags

    snapshots = [
        CounterSnapshot(
            snapshot_id=snapshot_id(day, slot),
            city=graph.city,
            day=day,
            true_context=TimeContext.from_timestamp(day, slot),
            volumes=dict(sorted(by_node.items())),
        )
        for (day, slot), by_node in sorted(volumes.items())
    ]
    logger.info("Read %d snapshots from %s", len(snapshots), path)
    return snapshots


def _read_core_labels(path: Path, graph: RoadGraph) -> dict[tuple[date, int], dict[int, int]]:
    known = set(graph.edge_ids)
    parsers = {
        "date": _parse_date,
        "slot": _parse_int,
        "edge_id": _parse_int,
        "class": CongestionClass.parse,
    }
    out: dict[tuple[date, int], dict[int, int]] = defaultdict(dict)
    for line, row in _rows(path, _read_table(path, CORE_LABEL_COLUMNS), parsers):
        _check_slot(path, line, row["slot"])
        key, edge = (row["date"], row["slot"]), row["edge_id"]
        if edge not in known:
            raise IngestError(path, line, f"unknown edge {edge}")
        if edge in out[key]:
            raise IngestError(path, line, f"duplicate label for edge {edge} at {snapshot_id(*key)}")
        out[key][edge] = row["class"]
    return out


def _read_eta_labels(path: Path, graph: RoadGraph) -> dict[tuple[date, int], dict[int, float]]:
    known = set(graph.supersegment_ids)
    parsers = {
        "date": _parse_date,
        "slot": _parse_int,
        "supersegment_id": _parse_int,
        "eta_seconds": _parse_float,
    }
    out: dict[tuple[date, int], dict[int, float]] = defaultdict(dict)
    for line, row in _rows(path, _read_table(path, ETA_LABEL_COLUMNS), parsers):
        _check_slot(path, line, row["slot"])
        key, segment = (row["date"], row["slot"]), row["supersegment_id"]
        if segment not in known:
            raise IngestError(path, line, f"unknown super-segment {segment}")
        if segment in out[key]:
            raise IngestError(
                path, line, f"duplicate ETA for super-segment {segment} at {snapshot_id(*key)}"
            )
        if row["eta_seconds"] <= 0:
            raise IngestError(path, line, f"ETA must be positive, got: {row['eta_seconds']}")
        out[key][segment] = row["eta_seconds"]
    return out


def _orphan_line(path: Path, key: tuple[date, int]) -> int:
    frame = pd.read_csv(path, dtype=str, keep_default_na=False, skipinitialspace=True)
    for i, (d, s) in enumerate(zip(frame["date"], frame["slot"])):
        if d.strip() == key[0].isoformat() and int(s) == key[1]:
            return i + 2
    return 1


def read_labels(
    data_dir: Path, graph: RoadGraph, snapshots: Sequence[CounterSnapshot]
) -> list[SnapshotLabels]:
    """Labels aligned with `snapshots`; a snapshot without label rows gets empty labels.

    Raises:
        IngestError: malformed rows, unknown edges or super-segments, duplicate
            (entity, timestamp) records, or labels at a timestamp without a snapshot.
    """
    data_dir = Path(data_dir)
    core_path, eta_path = data_dir / CORE_LABELS_FILE, data_dir / ETA_LABELS_FILE
    core = _read_core_labels(core_path, graph)
    eta = _read_eta_labels(eta_path, graph)

    stamps = {(s.day, s.true_context.slot) for s in snapshots}
    for path, table in ((core_path, core), (eta_path, eta)):
        orphans = sorted(set(table) - stamps)
        if orphans:
            raise IngestError(
                path, _orphan_line(path, orphans[0]),
                f"label at {snapshot_id(*orphans[0])} has no counter snapshot",
            )

    labels = []
    ignored = 0
    for snapshot in snapshots:
        key = (snapshot.day, snapshot.true_context.slot)
        congestion = [
            CongestionLabel(edge_id=e, cc=c) for e, c in sorted(core.get(key, {}).items())
        ]
        ignored += sum(label.cc == IGNORE for label in congestion)
        labels.append(
            SnapshotLabels(
                snapshot_id=snapshot.snapshot_id,
                congestion=congestion,
                eta=[
                    EtaLabel(supersegment_id=s, eta=v) for s, v in sorted(eta.get(key, {}).items())
                ],
            )
        )
    if ignored:
        logger.debug("%d congestion label rows are IGNORE", ignored)
    return labels


def read_dataset(data_dir: Path, city: str) -> Dataset:
    """Ingest a city's graph, snapshots and labels from `data_dir`"""
    data_dir = Path(data_dir)
    graph = read_graph(data_dir, city)
    snapshots = read_snapshots(data_dir / SNAPSHOTS_FILE, graph)
    labels = read_labels(data_dir, graph, snapshots)
    return Dataset(graph=graph, snapshots=tuple(snapshots), labels=tuple(labels))


# Writers
def write_frame(frame: pd.DataFrame, path: Path) -> None:
    """Atomically write a frame as CSV; NaN cells are written empty"""
    buffer = io.StringIO()
    frame.to_csv(buffer, index=False, na_rep="", lineterminator="\n")
    atomic_write_bytes(Path(path), buffer.getvalue().encode("utf-8"))
    logger.info("Wrote %d rows to %s", len(frame), path)


def _timestamp(snapshot: CounterSnapshot) -> tuple[str, int]:
    if snapshot.day is None or snapshot.true_context is None:
        raise IngestError(
            Path(SNAPSHOTS_FILE), None, f"snapshot {snapshot.snapshot_id} has no timestamp"
        )
    return snapshot.day.isoformat(), snapshot.true_context.slot


def write_dataset(dataset: Dataset, data_dir: Path) -> None:
    """Write every input file of a dataset into `data_dir`"""
    data_dir = Path(data_dir)
    graph = dataset.graph
    write_frame(
        pd.DataFrame(
            [(n.id, int(n.is_counter)) for n in graph.nodes], columns=list(NODE_COLUMNS)
        ),
        data_dir / NODES_FILE,
    )
    edge_rows = []
    for e in graph.edges:
        a = e.attributes.model_dump()
        a["oneway"], a["tunnel"] = int(a["oneway"]), int(a["tunnel"])
        edge_rows.append({"id": e.id, "source": e.source, "sink": e.sink, **a})
    edges = pd.DataFrame(edge_rows, columns=list(EDGE_COLUMNS))
    edges["counter_distance_hops"] = edges["counter_distance_hops"].astype("Int64")
    write_frame(edges, data_dir / EDGES_FILE)
    write_frame(
        pd.DataFrame(
            [(s.id, " ".join(map(str, s.node_path))) for s in graph.supersegments],
            columns=list(SUPERSEGMENT_COLUMNS),
        ),
        data_dir / SUPERSEGMENTS_FILE,
    )
    write_snapshots(dataset.snapshots, data_dir / SNAPSHOTS_FILE)

    core_rows, eta_rows = [], []
    for snapshot, labels in zip(dataset.snapshots, dataset.labels):
        day, slot = _timestamp(snapshot)
        for label in labels.congestion:
            name = "ignore" if label.cc == IGNORE else CLASS_NAMES[label.cc]
            core_rows.append((day, slot, label.edge_id, name))
        for label in labels.eta:
            eta_rows.append((day, slot, label.supersegment_id, label.eta))
    write_frame(
        pd.DataFrame(core_rows, columns=list(CORE_LABEL_COLUMNS)), data_dir / CORE_LABELS_FILE
    )
    write_frame(pd.DataFrame(eta_rows, columns=list(ETA_LABEL_COLUMNS)), data_dir / ETA_LABELS_FILE)


def write_snapshots(snapshots: Iterable[CounterSnapshot], path: Path) -> None:
    rows = []
    for snapshot in snapshots:
        day, slot = _timestamp(snapshot)
        for node, lags in sorted(snapshot.volumes.items()):
            rows.append((day, slot, node, *(np.nan if v is None else v for v in lags)))
    write_frame(pd.DataFrame(rows, columns=list(SNAPSHOT_COLUMNS)), path)
