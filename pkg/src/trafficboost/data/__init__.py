"""Road graph, snapshot and label types shared by every stage."""

from .base import GraphError, SnapshotError, TrafficBoostError
from .graph import counter_hops, to_networkx, validate_graph, weekend_flag
from .models import (
    CLASS_NAMES,
    IGNORE,
    LAG_MINUTES,
    NUM_CLASSES,
    NUM_LAGS,
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
    Violation,
)

__all__ = [
    "CLASS_NAMES",
    "IGNORE",
    "LAG_MINUTES",
    "NUM_CLASSES",
    "NUM_LAGS",
    "SLOTS_PER_DAY",
    "CongestionClass",
    "CongestionLabel",
    "CounterSnapshot",
    "Edge",
    "EdgeAttributes",
    "EtaLabel",
    "GraphError",
    "Node",
    "RoadGraph",
    "SnapshotError",
    "SnapshotLabels",
    "SuperSegment",
    "TimeContext",
    "TrafficBoostError",
    "Violation",
    "counter_hops",
    "to_networkx",
    "validate_graph",
    "weekend_flag",
]
