"""
Feature matrices for the congestion (core) and ETA (extended) heads.

Column order follows the feature importance ranking the models were designed around; the
names below are the persisted layout and must not be reordered.
"""

from datetime import date
from typing import Optional

import numpy as np

from ..data.models import CLASS_NAMES, LAG_MINUTES, CounterSnapshot, RoadGraph, TimeContext
from ..gbdt.models import FeatureMatrix
from .base import EncodingError
from .encoders import encode_edges, encode_supersegments
from .models import CcEncodingTable, ConditioningSet, EtaEncodingTable


def _te_name(cc: str, conditioning: ConditioningSet) -> str:
    if conditioning is ConditioningSet.NONE:
        return f"te_{cc}"
    return f"te_{cc}_{conditioning.value}"


CORE_FEATURES: tuple[str, ...] = (
    "te_green_slot_weekend",
    "te_red_slot",
    "te_green_slot",
    "highway_importance",
    "te_red_slot_weekend",
    "te_yellow_slot_weekend",
    "te_red_weekend",
    "is_weekend",
    "te_yellow_slot",
    "te_yellow_weekend",
    "slot",
    "month",
    "te_green_slot_dow",
    "te_green_dow",
    "te_red_dow",
    "day_of_week",
    "oneway",
    "highway_class",
    "te_red_slot_dow",
    "te_red",
    "te_green_weekend",
    "tunnel",
    "te_yellow_dow",
    "speed_kph",
    "maxspeed",
    "te_yellow",
    "te_green",
    "counter_distance_hops",
    "lanes",
    "length_m",
    "source_id",
    "sink_id",
    "edge_id",
    "sink_in_degree",
    "source_out_degree",
    "source_in_degree",
    "sink_out_degree",
    "te_yellow_slot_dow",
    "sink_volume_lag15",
    "source_volume_lag15",
    "sink_volume_lag45",
    "sink_volume_lag60",
    "source_volume_lag60",
    "source_volume_lag45",
    "sink_volume_lag30",
    "source_volume_lag30",
)

EXTENDED_FEATURES: tuple[str, ...] = (
    "smoothed_te_slot_dow",
    "supersegment_id",
    "smoothed_te_slot",
    "slot",
    "te_slot_dow",
    "month",
    "te_dow",
    "te_slot",
    "node_count",
    "te",
    "day_of_week",
    "te_weekend",
    "is_weekend",
    "smoothed_te_slot_weekend",
    "te_slot_weekend",
)

CALENDAR_FEATURES = ("is_weekend", "slot", "month", "day_of_week")

# Columns that depend on the snapshot's time context; nulled or dropped without stage one
CONTEXT_COLUMNS_CORE: tuple[str, ...] = tuple(
    name
    for name in CORE_FEATURES
    if name in CALENDAR_FEATURES
    or any(
        name == _te_name(cc, cond)
        for cc in CLASS_NAMES
        for cond in ConditioningSet
        if cond is not ConditioningSet.NONE
    )
)
CONTEXT_COLUMNS_EXTENDED: tuple[str, ...] = tuple(
    name for name in EXTENDED_FEATURES if name not in ("supersegment_id", "node_count", "te")
)


def _calendar_columns(context: TimeContext) -> dict[str, float]:
    return {
        "is_weekend": float(context.is_weekend),
        "slot": float(context.slot),
        "month": float(context.month),
        "day_of_week": float(context.day_of_week),
    }


def edge_static_columns(graph: RoadGraph) -> dict[str, np.ndarray]:
    """Context-independent edge columns (attributes, ids, degrees), in graph edge order"""
    in_degree, out_degree = graph.degrees()
    edges = graph.edges

    def column(values) -> np.ndarray:
        return np.array(list(values), dtype=np.float64)

    attrs = [e.attributes for e in edges]
    return {
        "highway_importance": column(a.highway_importance for a in attrs),
        "oneway": column(a.oneway for a in attrs),
        "highway_class": column(a.highway_class for a in attrs),
        "tunnel": column(a.tunnel for a in attrs),
        "speed_kph": column(a.speed_kph for a in attrs),
        "maxspeed": column(a.maxspeed for a in attrs),
        "counter_distance_hops": column(
            np.nan if a.counter_distance_hops is None else a.counter_distance_hops for a in attrs
        ),
        "lanes": column(a.lanes for a in attrs),
        "length_m": column(a.length_m for a in attrs),
        "source_id": column(e.source for e in edges),
        "sink_id": column(e.sink for e in edges),
        "edge_id": column(e.id for e in edges),
        "sink_in_degree": column(in_degree[e.sink] for e in edges),
        "source_out_degree": column(out_degree[e.source] for e in edges),
        "source_in_degree": column(in_degree[e.source] for e in edges),
        "sink_out_degree": column(out_degree[e.sink] for e in edges),
    }


def build_core_features(
    graph: RoadGraph,
    snapshot: CounterSnapshot,
    context: Optional[TimeContext],
    cc_table: CcEncodingTable,
    exclude_day: Optional[date] = None,
    statics: Optional[dict[str, np.ndarray]] = None,
) -> FeatureMatrix:
    """One row per edge with the 46 core columns of `CORE_FEATURES`.

    Args:
        graph (RoadGraph): road network; rows follow its edge order.
        snapshot (CounterSnapshot): counter volumes; endpoints that are not counters get MISSING.
        context (TimeContext): true or predicted time context.
        cc_table (CcEncodingTable): fitted congestion encoding.
        exclude_day (date, optional): leave-one-day-out day for training rows. Defaults to None.
        statics (dict, optional): precomputed `edge_static_columns(graph)`. Defaults to None.

    Raises:
        EncodingError: context is missing.
    """
    if context is None:
        raise EncodingError(f"Snapshot {snapshot.snapshot_id} has no time context")
    edge_ids = graph.edge_ids
    columns: dict[str, np.ndarray] = dict(
        edge_static_columns(graph) if statics is None else statics
    )
    columns.update(_calendar_columns(context))

    for cond in ConditioningSet:
        te = encode_edges(cc_table, cond, edge_ids, context, exclude_day)
        for c, cc in enumerate(CLASS_NAMES):
            columns[_te_name(cc, cond)] = te[:, c]

    for end in ("source", "sink"):
        node_ids = [getattr(e, end) for e in graph.edges]
        volumes = snapshot.volume_matrix(node_ids)
        for lag, minutes in enumerate(LAG_MINUTES):
            columns[f"{end}_volume_lag{minutes}"] = volumes[:, lag]

    return FeatureMatrix.from_columns(
        {name: columns[name] for name in CORE_FEATURES}, rows=len(edge_ids)
    )


def build_extended_features(
    graph: RoadGraph,
    context: Optional[TimeContext],
    eta_table: EtaEncodingTable,
    exclude_day: Optional[date] = None,
) -> FeatureMatrix:
    """One row per super-segment with the 15 extended columns of `EXTENDED_FEATURES`.

    Raises:
        EncodingError: context is missing.
    """
    if context is None:
        raise EncodingError("Extended features need a time context")
    seg_ids = graph.supersegment_ids

    def te(cond: ConditioningSet, smoothed: bool = False) -> np.ndarray:
        return encode_supersegments(eta_table, cond, seg_ids, context, exclude_day, smoothed)

    columns: dict[str, np.ndarray] = {
        "smoothed_te_slot_dow": te(ConditioningSet.SLOT_DOW, smoothed=True),
        "supersegment_id": np.array(seg_ids, dtype=np.float64),
        "smoothed_te_slot": te(ConditioningSet.SLOT, smoothed=True),
        "te_slot_dow": te(ConditioningSet.SLOT_DOW),
        "te_dow": te(ConditioningSet.DOW),
        "te_slot": te(ConditioningSet.SLOT),
        "node_count": np.array([s.node_count for s in graph.supersegments], dtype=np.float64),
        "te": te(ConditioningSet.NONE),
        "te_weekend": te(ConditioningSet.WEEKEND),
        "smoothed_te_slot_weekend": te(ConditioningSet.SLOT_WEEKEND, smoothed=True),
        "te_slot_weekend": te(ConditioningSet.SLOT_WEEKEND),
    }
    columns.update(_calendar_columns(context))
    return FeatureMatrix.from_columns(
        {name: columns[name] for name in EXTENDED_FEATURES}, rows=len(seg_ids)
    )
