from datetime import date, timedelta

import numpy as np
import pytest
from numpy.testing import assert_allclose
from pydantic import ValidationError

from trafficboost.data.models import IGNORE, CongestionLabel, EtaLabel, TimeContext
from trafficboost.encoding.base import EncodingError
from trafficboost.encoding.encoders import (
    SMOOTHING_DENOMINATOR,
    encode_edges,
    encode_supersegments,
    eta_grid,
    fit_cc_encoding,
    fit_eta_encoding,
    lookup_cc,
    lookup_eta,
    smoothed_te,
)
from trafficboost.encoding.models import (
    CategoryKey,
    CcEncodingTable,
    ConditioningSet,
    EtaEncodingTable,
)

MONDAY = date(2021, 3, 1)
CONDITIONING = list(ConditioningSet)


def _encode_cc(labels, edge_id, key, cc, w):
    """Naive reference: recount everything for one (edge, key, class)"""
    kept = [(ctx, lab) for _, ctx, lab in labels if lab.cc != IGNORE]
    mean = sum(lab.cc == cc for _, lab in kept) / len(kept)
    matching = [
        lab
        for ctx, lab in kept
        if lab.edge_id == edge_id and CategoryKey.from_context(key.conditioning, ctx) == key
    ]
    hits = sum(lab.cc == cc for lab in matching)
    return (hits + w * mean) / (len(matching) + w)


def _cc_row(day, slot, edge_id, cc):
    return (day, TimeContext.from_timestamp(day, slot), CongestionLabel(edge_id=edge_id, cc=cc))


def _random_labels(rng, n_rows):
    labels = []
    for _ in range(n_rows):
        day = MONDAY + timedelta(days=int(rng.integers(0, 9)))
        ctx = TimeContext.from_timestamp(day, int(rng.choice([0, 1, 47, 95])))
        cc = int(rng.choice([IGNORE, 0, 1, 2]))
        labels.append((day, ctx, CongestionLabel(edge_id=int(rng.integers(0, 4)), cc=cc)))
    labels.append(_cc_row(MONDAY, 0, 0, 1))
    return labels


def test_cc_encoding_matches_reference():
    rng = np.random.default_rng(0)
    for _ in range(100):
        labels = _random_labels(rng, int(rng.integers(1, 30)))
        w = float(rng.choice([0.5, 5.0, 20.0]))
        table = fit_cc_encoding(labels, w=w)
        for _ in range(5):
            day, ctx, _ = labels[int(rng.integers(len(labels)))]
            cond = CONDITIONING[int(rng.integers(len(CONDITIONING)))]
            key = CategoryKey.from_context(cond, ctx)
            edge_id, cc = int(rng.integers(0, 5)), int(rng.integers(0, 3))
            assert lookup_cc(table, edge_id, key, cc) == pytest.approx(
                _encode_cc(labels, edge_id, key, cc, w), abs=1e-12
            )


def test_leave_one_day_out_equals_refit():
    rng = np.random.default_rng(1)
    checked = 0
    for _ in range(100):
        labels = _random_labels(rng, int(rng.integers(5, 40)))
        table = fit_cc_encoding(labels)
        day = labels[int(rng.integers(len(labels)))][0]
        rest = [row for row in labels if row[0] != day]
        if not any(lab.cc != IGNORE for _, _, lab in rest):
            continue
        refit = fit_cc_encoding(rest)
        ctx = TimeContext.from_timestamp(day, 47)
        for cond in ConditioningSet:
            assert_allclose(
                encode_edges(table, cond, [0, 1, 2, 3, 9], ctx, exclude_day=day),
                encode_edges(refit, cond, [0, 1, 2, 3, 9], ctx),
                atol=1e-12,
            )
        checked += 1
    assert checked > 50


def test_cc_encoding_rows_are_distributions():
    rng = np.random.default_rng(2)
    table = fit_cc_encoding(_random_labels(rng, 50))
    ctx = TimeContext.from_timestamp(MONDAY, 1)
    for cond in ConditioningSet:
        te = encode_edges(table, cond, [0, 1, 2, 3, 77], ctx)
        assert te.shape == (5, 3)
        assert_allclose(te.sum(axis=1), 1.0)


def test_unseen_edge_gets_global_mean():
    labels = [_cc_row(MONDAY, 3, 1, c) for c in (0, 0, 2, IGNORE)]
    table = fit_cc_encoding(labels)
    key = CategoryKey(conditioning=ConditioningSet.SLOT, slot=3)
    assert lookup_cc(table, 42, key, 0) == pytest.approx(2 / 3)
    assert table.count(1, key) == 3
    assert_allclose(table.fractions(1, key), [2 / 3, 0.0, 1 / 3])


@pytest.mark.parametrize(
    "labels, w",
    [
        ([], 20.0),
        ([_cc_row(MONDAY, 0, 1, 0)], 0.0),
        ([_cc_row(MONDAY, 0, 1, IGNORE)], 20.0),
    ],
)
def test_cc_encoding_errors(labels, w):
    with pytest.raises(EncodingError):
        fit_cc_encoding(labels, w=w)


def test_category_key_components():
    assert CategoryKey(conditioning=ConditioningSet.SLOT_DOW, slot=2, dow=3).code == 17
    assert CategoryKey(conditioning=ConditioningSet.SLOT_WEEKEND, slot=2, weekend=True).code == 5
    assert CategoryKey(conditioning=ConditioningSet.NONE).code == 0
    with pytest.raises(ValidationError):
        CategoryKey(conditioning=ConditioningSet.SLOT)
    with pytest.raises(ValidationError):
        CategoryKey(conditioning=ConditioningSet.DOW, dow=1, slot=4)


def _eta_labels():
    rows = []
    for day_offset, slot, seg, eta in [
        (0, 10, 1, 100.0),
        (0, 10, 1, 120.0),
        (1, 10, 1, 200.0),
        (0, 20, 2, 50.0),
        (7, 10, 1, 140.0),
    ]:
        day = MONDAY + timedelta(days=day_offset)
        ctx = TimeContext.from_timestamp(day, slot)
        rows.append((day, ctx, EtaLabel(supersegment_id=seg, eta=eta)))
    return rows


def test_eta_lookup_and_fallbacks():
    table = fit_eta_encoding(_eta_labels())
    monday_10 = TimeContext.from_timestamp(MONDAY, 10)
    key = CategoryKey.from_context(ConditioningSet.SLOT_DOW, monday_10)
    assert lookup_eta(table, 1, key) == pytest.approx((100 + 120 + 140) / 3)
    # unseen key -> super-segment mean
    unseen = CategoryKey(conditioning=ConditioningSet.SLOT, slot=50)
    assert lookup_eta(table, 1, unseen) == pytest.approx(140.0)
    # unseen super-segment -> global mean
    assert lookup_eta(table, 9, key) == pytest.approx(122.0)


def test_eta_leave_one_day_out():
    table = fit_eta_encoding(_eta_labels())
    key = CategoryKey(conditioning=ConditioningSet.SLOT, slot=10)
    assert lookup_eta(table, 1, key, exclude_day=MONDAY) == pytest.approx(170.0)
    assert table.global_mean(MONDAY.toordinal()) == pytest.approx(170.0)


def test_eta_grid_fills_every_category():
    table = fit_eta_encoding(_eta_labels())
    grid = eta_grid(table, ConditioningSet.SLOT_DOW)
    assert grid.shape == (2, 96 * 7)
    assert np.all(np.isfinite(grid))


def test_smoothing_constants():
    assert SMOOTHING_DENOMINATOR == 1957


def test_smoothing_impulse_response():
    impulse = np.zeros(96)
    impulse[0] = 1.0
    out = smoothed_te(impulse)
    assert out[0] == pytest.approx(1 / 1957)
    assert out[1] == pytest.approx(16 / 1957)
    assert out[95] == pytest.approx(16 / 1957)
    assert out[2] == pytest.approx(81 / 1957)
    assert out[4] == pytest.approx(625 / 1957)
    assert out[5] == 0.0
    assert out[91] == 0.0


def test_smoothing_is_linear_and_mean_preserving():
    rng = np.random.default_rng(3)
    a, b = rng.normal(size=96), rng.normal(size=96)
    assert_allclose(smoothed_te(np.full(96, 4.2)), 4.2, atol=1e-12)
    assert_allclose(
        smoothed_te(2 * a + 3 * b), 2 * smoothed_te(a) + 3 * smoothed_te(b), atol=1e-12
    )
    assert smoothed_te(a).mean() == pytest.approx(a.mean(), abs=1e-12)


def test_smoothing_rejects_wrong_length():
    with pytest.raises(EncodingError):
        smoothed_te(np.zeros(95))


def test_smoothed_supersegment_encoding():
    table = fit_eta_encoding(_eta_labels())
    ctx = TimeContext.from_timestamp(MONDAY, 10)
    out = encode_supersegments(table, ConditioningSet.SLOT, [1, 2, 9], ctx, smoothed=True)
    grid = eta_grid(table, ConditioningSet.SLOT)
    assert out[0] == pytest.approx(smoothed_te(grid[0])[10])
    assert out[2] == pytest.approx(table.global_mean())
    with pytest.raises(EncodingError):
        encode_supersegments(table, ConditioningSet.DOW, [1], ctx, smoothed=True)


def test_tables_round_trip_bytes():
    rng = np.random.default_rng(4)
    cc = fit_cc_encoding(_random_labels(rng, 30), w=7.0)
    eta = fit_eta_encoding(_eta_labels())
    cc2 = CcEncodingTable.from_bytes(cc.to_bytes())
    eta2 = EtaEncodingTable.from_bytes(eta.to_bytes())
    ctx = TimeContext.from_timestamp(MONDAY, 1)
    assert cc2.pseudocount == 7.0
    assert_allclose(
        encode_edges(cc2, ConditioningSet.SLOT_DOW, [0, 1, 2], ctx),
        encode_edges(cc, ConditioningSet.SLOT_DOW, [0, 1, 2], ctx),
    )
    assert eta2.global_mean() == eta.global_mean()
    with pytest.raises(EncodingError):
        CcEncodingTable.from_bytes(eta.to_bytes())
    with pytest.raises(EncodingError):
        EtaEncodingTable.from_bytes(b"not a table")
