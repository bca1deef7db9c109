"""
Pydantic models for road graphs, counter snapshots and traffic labels.
"""

from datetime import date
from enum import IntEnum
from typing import Optional

import numpy as np
from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    NonNegativeFloat,
    NonNegativeInt,
    PositiveFloat,
    computed_field,
    field_validator,
)

SLOTS_PER_DAY = 96
MINUTES_PER_SLOT = 15
NUM_LAGS = 4
LAG_MINUTES = (15, 30, 45, 60)
WEEKEND_DAYS = frozenset({5, 6})

# Sentinel for unlabelled edges; never a valid class index
IGNORE = -1


class CongestionClass(IntEnum):
    """Congestion class indices shared by training, prediction and output files"""

    RED = 0
    YELLOW = 1
    GREEN = 2

    @classmethod
    def parse(cls, name: str) -> int:
        """Map a label file token ('red', 'yellow', 'green', 'ignore') to its index"""
        token = name.strip().lower()
        if token == "ignore":
            return IGNORE
        try:
            return cls[token.upper()].value
        except KeyError:
            raise ValueError(
                f"Congestion class must be red, yellow, green or ignore, got: {name}"
            )


NUM_CLASSES = len(CongestionClass)
CLASS_NAMES = tuple(c.name.lower() for c in CongestionClass)


# Road graph models
class Node(BaseModel):
    model_config = ConfigDict(frozen=True)

    id: int = Field(description="Unique node identifier")
    is_counter: bool = Field(
        default=False, description="True if a loop counter reports volumes at this node"
    )


class EdgeAttributes(BaseModel):
    model_config = ConfigDict(frozen=True)

    oneway: bool = Field(description="Edge can only be used in one direction")
    tunnel: bool = Field(description="Edge runs in a tunnel")
    highway_class: int = Field(ge=0, description="Numerical mapping of the OSM highway class")
    speed_kph: NonNegativeFloat = Field(description="Edge speed in km per hour")
    maxspeed: NonNegativeFloat = Field(description="Maximum legal speed limit")
    lanes: NonNegativeInt = Field(description="Number of traffic lanes")
    length_m: NonNegativeFloat = Field(description="Edge length in meters")
    highway_importance: float = Field(
        description="Importance of the highway within the road network (opaque input value)"
    )
    counter_distance_hops: Optional[NonNegativeInt] = Field(
        default=None,
        description="Node hops to the closest counter, None when no counter is reachable",
    )


class Edge(BaseModel):
    model_config = ConfigDict(frozen=True)

    id: int = Field(description="Unique edge identifier")
    source: int = Field(description="Source node id")
    sink: int = Field(description="Sink node id")
    attributes: EdgeAttributes


class SuperSegment(BaseModel):
    model_config = ConfigDict(frozen=True)

    id: int = Field(description="Unique super-segment identifier")
    node_path: tuple[int, ...] = Field(description="Ordered node ids along the super-segment")

    @field_validator("node_path")
    @classmethod
    def validate_path_length(cls, v: tuple[int, ...]) -> tuple[int, ...]:
        """A super-segment spans at least one edge"""
        if len(v) < 2:
            raise ValueError(f"Super-segment path needs at least 2 nodes, got: {len(v)}")
        return v

    @property
    def node_count(self) -> int:
        return len(self.node_path)

    @property
    def node_pairs(self) -> list[tuple[int, int]]:
        """Consecutive (source, sink) pairs along the path"""
        return list(zip(self.node_path[:-1], self.node_path[1:]))


class RoadGraph(BaseModel):
    """Road network of one city.

    Cross-reference invariants (dangling ids, duplicate ids, broken super-segment paths)
    are not enforced on construction; `validate_graph` reports them as data.
    """

    model_config = ConfigDict(frozen=True)

    city: str = Field(default="city", description="City identifier")
    nodes: tuple[Node, ...] = Field(default=())
    edges: tuple[Edge, ...] = Field(default=())
    supersegments: tuple[SuperSegment, ...] = Field(default=())

    @property
    def counter_ids(self) -> list[int]:
        """Sorted ids of the counter nodes"""
        return sorted(n.id for n in self.nodes if n.is_counter)

    @property
    def edge_ids(self) -> list[int]:
        return [e.id for e in self.edges]

    @property
    def supersegment_ids(self) -> list[int]:
        return [s.id for s in self.supersegments]

    def edge_index(self) -> dict[int, int]:
        """Map edge id to its row position in edge order"""
        return {e.id: i for i, e in enumerate(self.edges)}

    def supersegment_index(self) -> dict[int, int]:
        """Map super-segment id to its row position"""
        return {s.id: i for i, s in enumerate(self.supersegments)}

    def endpoint_pairs(self) -> set[tuple[int, int]]:
        return {(e.source, e.sink) for e in self.edges}

    def degrees(self) -> tuple[dict[int, int], dict[int, int]]:
        """Return (in_degree, out_degree) maps keyed by node id"""
        in_degree = {n.id: 0 for n in self.nodes}
        out_degree = {n.id: 0 for n in self.nodes}
        for e in self.edges:
            out_degree[e.source] = out_degree.get(e.source, 0) + 1
            in_degree[e.sink] = in_degree.get(e.sink, 0) + 1
        return in_degree, out_degree


# Time context models
class TimeContext(BaseModel):
    """Calendar context of a snapshot: stage-one targets and stage-two features"""

    model_config = ConfigDict(frozen=True)

    month: int = Field(ge=1, le=12, description="Month of the year")
    day_of_week: int = Field(ge=0, le=6, description="Day of the week, 0 = Monday")
    slot: int = Field(ge=0, le=SLOTS_PER_DAY - 1, description="15-minute slot of the day")

    @computed_field
    @property
    def is_weekend(self) -> bool:
        return self.day_of_week in WEEKEND_DAYS

    @classmethod
    def from_timestamp(cls, day: date, slot: int) -> "TimeContext":
        """Build the context of a (date, slot) timestamp"""
        return cls(month=day.month, day_of_week=day.weekday(), slot=slot)


# Snapshot models
class CounterSnapshot(BaseModel):
    """One hour of counter volumes (4 lags of 15 minutes) at a reference instant"""

    model_config = ConfigDict(frozen=True)

    snapshot_id: str = Field(description="Opaque snapshot identifier")
    city: str = Field(description="City identifier")
    day: Optional[date] = Field(
        default=None, description="Calendar date, known for training snapshots only"
    )
    true_context: Optional[TimeContext] = Field(
        default=None, description="Ground-truth context, absent at test time"
    )
    volumes: dict[int, tuple[Optional[NonNegativeFloat], ...]] = Field(
        default_factory=dict,
        description="Counter node id -> volumes at t-15, t-30, t-45, t-60 minutes",
    )

    @field_validator("volumes")
    @classmethod
    def validate_lag_count(
        cls, v: dict[int, tuple[Optional[float], ...]]
    ) -> dict[int, tuple[Optional[float], ...]]:
        """Every counter carries exactly four lag slots"""
        for node_id, lags in v.items():
            if len(lags) != NUM_LAGS:
                raise ValueError(
                    f"Node {node_id} must carry {NUM_LAGS} lag values, got: {len(lags)}"
                )
        return v

    def volume_matrix(self, node_ids: list[int]) -> np.ndarray:
        """Volumes for `node_ids` as a (len(node_ids), 4) array, NaN where missing"""
        out = np.full((len(node_ids), NUM_LAGS), np.nan)
        for i, node_id in enumerate(node_ids):
            lags = self.volumes.get(node_id)
            if lags is None:
                continue
            out[i] = [np.nan if x is None else x for x in lags]
        return out


# Label models
class CongestionLabel(BaseModel):
    model_config = ConfigDict(frozen=True)

    edge_id: int
    cc: int = Field(description="Class index (red=0, yellow=1, green=2) or IGNORE (-1)")

    @field_validator("cc")
    @classmethod
    def validate_class(cls, v: int) -> int:
        if v != IGNORE and not 0 <= v < NUM_CLASSES:
            raise ValueError(f"Congestion class must be 0-2 or IGNORE, got: {v}")
        return v

    @property
    def is_ignored(self) -> bool:
        return self.cc == IGNORE


class EtaLabel(BaseModel):
    model_config = ConfigDict(frozen=True)

    supersegment_id: int
    eta: PositiveFloat = Field(description="Expected time of arrival in seconds")


class SnapshotLabels(BaseModel):
    """All labels attached to one snapshot"""

    snapshot_id: str
    congestion: list[CongestionLabel] = Field(default_factory=list)
    eta: list[EtaLabel] = Field(default_factory=list)

    @property
    def has_labels(self) -> bool:
        """True when at least one edge class or one ETA is known"""
        return bool(self.eta) or any(label.cc != IGNORE for label in self.congestion)

    def congestion_vector(self, graph: RoadGraph) -> np.ndarray:
        """Class per edge in graph edge order; unlabelled edges are IGNORE"""
        out = np.full(len(graph.edges), IGNORE, dtype=np.int64)
        index = graph.edge_index()
        for label in self.congestion:
            out[index[label.edge_id]] = label.cc
        return out

    def eta_vector(self, graph: RoadGraph) -> np.ndarray:
        """ETA per super-segment in graph order; NaN where unlabelled"""
        out = np.full(len(graph.supersegments), np.nan)
        index = graph.supersegment_index()
        for label in self.eta:
            out[index[label.supersegment_id]] = label.eta
        return out


class Violation(BaseModel):
    """A broken road graph invariant"""

    model_config = ConfigDict(frozen=True)

    entity: str = Field(description="'node', 'edge' or 'supersegment'")
    entity_id: int
    message: str

    def __str__(self) -> str:
        return f"{self.entity} {self.entity_id}: {self.message}"
