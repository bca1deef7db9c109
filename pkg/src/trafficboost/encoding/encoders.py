"""
Target encoders for congestion classes and ETAs.

Congestion classes use Bayesian smoothing toward the global class fractions:

    TE_c(edge, key) = (count_c(edge, key) + w * mean_c) / (count(edge, key) + w)

ETAs use plain per-key means with the fallback chain key -> super-segment -> global, and an
optional cyclic time-window smoothing over neighbouring slots.
"""

from datetime import date
from typing import Iterable, Optional

import numpy as np

from ..data.models import SLOTS_PER_DAY, CongestionLabel, EtaLabel, TimeContext
from .base import EncodingError
from .models import (
    DEFAULT_PSEUDOCOUNT,
    CategoryKey,
    CcEncodingTable,
    ConditioningSet,
    EtaEncodingTable,
    category_codes,
    day_ordinal,
)

SMOOTHING_RADIUS = 4
# neighbour i on either side weighs (i + 1)^4; the centre weighs 1
SMOOTHING_WEIGHTS = np.array([1.0] + [(i + 1) ** 4 for i in range(1, SMOOTHING_RADIUS + 1)])
SMOOTHING_DENOMINATOR = SMOOTHING_WEIGHTS[0] + 2.0 * SMOOTHING_WEIGHTS[1:].sum()


# Congestion class encoding
def fit_cc_encoding(
    labels: Iterable[tuple[date, TimeContext, CongestionLabel]],
    w: float = DEFAULT_PSEUDOCOUNT,
) -> CcEncodingTable:
    """Fit a congestion class encoding table.

    Args:
        labels (Iterable[tuple[date, TimeContext, CongestionLabel]]): one entry per labelled
            edge and timestamp; IGNORE labels are skipped.
        w (float, optional): pseudocount. Defaults to 20.

    Raises:
        EncodingError: w is not positive, or no non-IGNORE label is supplied.

    Returns:
        CcEncodingTable: fitted table.
    """
    if not w > 0:
        raise EncodingError(f"Pseudocount must be positive, got: {w}")
    rows = [
        (label.edge_id, day.toordinal(), ctx.slot, ctx.day_of_week, label.cc)
        for day, ctx, label in labels
    ]
    if not rows:
        raise EncodingError("Cannot fit a congestion encoding from an empty label set")
    edge_ids, days, slots, dows, classes = (np.array(col) for col in zip(*rows))
    return CcEncodingTable.from_observations(edge_ids, days, slots, dows, classes, pseudocount=w)


def _cc_te(
    table: CcEncodingTable,
    conditioning: ConditioningSet,
    positions: np.ndarray,
    code: int,
    exclude_day: Optional[int],
) -> np.ndarray:
    totals = table.global_counts(exclude_day)
    if totals.sum() == 0:
        raise EncodingError("No labelled observations remain after excluding the day")
    mean_cc = totals / totals.sum()
    counts = table.class_counts(conditioning, positions, code, exclude_day)
    w = table.pseudocount
    return (counts + w * mean_cc) / (counts.sum(axis=1, keepdims=True) + w)


def lookup_cc(
    table: CcEncodingTable,
    edge_id: int,
    key: CategoryKey,
    cc: int,
    exclude_day: Optional[date] = None,
) -> float:
    """Smoothed fraction of class `cc` for an edge under a category key.

    Args:
        table (CcEncodingTable): fitted table.
        edge_id (int): edge to look up; unseen edges behave as a zero count.
        key (CategoryKey): conditioning set and category values.
        cc (int): class index.
        exclude_day (date, optional): drop every observation of this calendar day first
            (training mode). Defaults to None.

    Returns:
        float: the encoded value.
    """
    positions = table.positions([edge_id])
    te = _cc_te(table, key.conditioning, positions, key.code, day_ordinal(exclude_day))
    return float(te[0, cc])


def encode_edges(
    table: CcEncodingTable,
    conditioning: ConditioningSet,
    edge_ids,
    context: TimeContext,
    exclude_day: Optional[date] = None,
) -> np.ndarray:
    """Smoothed class fractions of many edges at one context, shape (n_edges, num_classes)"""
    code = CategoryKey.from_context(conditioning, context).code
    return _cc_te(table, conditioning, table.positions(edge_ids), code, day_ordinal(exclude_day))


# ETA encoding
def fit_eta_encoding(
    labels: Iterable[tuple[date, TimeContext, EtaLabel]],
) -> EtaEncodingTable:
    """Fit an ETA encoding table of per-key mean ETAs.

    Raises:
        EncodingError: no labels.
    """
    rows = [
        (label.supersegment_id, day.toordinal(), ctx.slot, ctx.day_of_week, label.eta)
        for day, ctx, label in labels
    ]
    if not rows:
        raise EncodingError("Cannot fit an ETA encoding from an empty label set")
    seg_ids, days, slots, dows, etas = (np.array(col) for col in zip(*rows))
    return EtaEncodingTable.from_observations(seg_ids, days, slots, dows, etas)


def eta_grid(
    table: EtaEncodingTable,
    conditioning: ConditioningSet,
    exclude_day: Optional[int] = None,
) -> np.ndarray:
    """Mean ETA for every (super-segment row, category) with fallbacks filled in"""
    global_mean = table.global_mean(exclude_day)
    sums, counts = table.sums_counts(conditioning, exclude_day)
    seg_sums, seg_counts = table.sums_counts(ConditioningSet.NONE, exclude_day)
    seg_mean = np.full(seg_counts.shape, global_mean)
    np.divide(seg_sums, seg_counts, out=seg_mean, where=seg_counts > 0)
    grid = np.broadcast_to(seg_mean, counts.shape).copy()
    np.divide(sums, counts, out=grid, where=counts > 0)
    return grid


def lookup_eta(
    table: EtaEncodingTable,
    supersegment_id: int,
    key: CategoryKey,
    exclude_day: Optional[date] = None,
) -> float:
    """Mean ETA for a super-segment under a category key.

    Unseen keys fall back to the super-segment's unconditional mean, unseen super-segments
    to the global mean.
    """
    excluded = day_ordinal(exclude_day)
    pos = int(table.positions([supersegment_id])[0])
    if pos < 0:
        return table.global_mean(excluded)
    return float(eta_grid(table, key.conditioning, excluded)[pos, key.code])


def encode_supersegments(
    table: EtaEncodingTable,
    conditioning: ConditioningSet,
    supersegment_ids,
    context: TimeContext,
    exclude_day: Optional[date] = None,
    smoothed: bool = False,
) -> np.ndarray:
    """ETA encoding of many super-segments at one context.

    Args:
        smoothed (bool, optional): average the slot-indexed encodings around `context.slot`
            with `smoothed_te`. Only valid for conditioning sets containing the slot.

    Raises:
        EncodingError: smoothing requested for a conditioning set without the slot.
    """
    excluded = day_ordinal(exclude_day)
    grid = eta_grid(table, conditioning, excluded)
    if smoothed:
        if not conditioning.has_slot:
            raise EncodingError(
                f"Smoothing needs a slot-conditioned encoding, got: '{conditioning.value}'"
            )
        codes = category_codes(conditioning, np.arange(SLOTS_PER_DAY), context.day_of_week)
        values = smoothed_te(grid[:, codes])[:, context.slot]
    else:
        values = grid[:, CategoryKey.from_context(conditioning, context).code]

    positions = table.positions(supersegment_ids)
    out = np.full(len(positions), table.global_mean(excluded))
    seen = positions >= 0
    out[seen] = values[positions[seen]]
    return out


def smoothed_te(te_by_slot) -> np.ndarray:
    """Cyclic time-window smoothing of slot-indexed encodings.

    Smoothed(t) = [TE(t) + sum_{i=1..4} (TE(t-i) + TE(t+i)) * (i+1)^4] / 1957, with slot
    indices taken modulo SLOTS_PER_DAY.

    Args:
        te_by_slot: vector of length SLOTS_PER_DAY, or a 2-D array with slots on the last axis.

    Raises:
        EncodingError: the slot axis does not have SLOTS_PER_DAY entries.
    """
    te = np.asarray(te_by_slot, dtype=np.float64)
    if te.ndim == 0 or te.shape[-1] != SLOTS_PER_DAY:
        raise EncodingError(
            f"Expected {SLOTS_PER_DAY} slot values, got shape: {te.shape}"
        )
    out = SMOOTHING_WEIGHTS[0] * te
    for i in range(1, SMOOTHING_RADIUS + 1):
        out = out + (np.roll(te, i, axis=-1) + np.roll(te, -i, axis=-1)) * SMOOTHING_WEIGHTS[i]
    return out / SMOOTHING_DENOMINATOR
