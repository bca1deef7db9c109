"""
Synthetic city generator with planted calendar signals.

Counters see two sharp rush hours over a flat off-peak level, each counter at its own phase
so that the lagged volumes pin down the slot; volumes are scaled per counter, per day of week
and by a slow trend. Congestion classes threshold a smoother latent level, and ETAs oscillate
around a per-super-segment base. Every draw comes from one seeded generator, so a spec always
produces the same dataset.
"""

import logging
from datetime import timedelta

import networkx as nx
import numpy as np

from ..data.base import GraphError
from ..data.graph import counter_hops, validate_graph
from ..data.models import (
    IGNORE,
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
)
from .config import SyntheticSpec
from .io import Dataset, snapshot_id

logger = logging.getLogger(__name__)

# Congestion day profile: morning and evening peaks over a midday swell
_PEAKS = ((32.0, 5.0, 0.6), (70.0, 6.0, 0.5))  # (slot, width, height)
# Counter rush hours: (slot, share of peak_height); 36 slots apart so spread phases interleave
_RUSH_HOURS = ((30.0, 1.0), (66.0, 0.85))
_MAXSPEEDS = np.array([30.0, 50.0, 70.0, 90.0, 110.0])


def _cyclic_distance(s: np.ndarray, centre: float) -> np.ndarray:
    d = np.abs(s - centre)
    return np.minimum(d, SLOTS_PER_DAY - d)


def day_profile(slot) -> np.ndarray:
    """Relative congestion level at (fractional, cyclic) slot positions"""
    s = np.asarray(slot, dtype=np.float64) % SLOTS_PER_DAY
    level = 0.2 + 0.3 * (1.0 - np.cos(2.0 * np.pi * s / SLOTS_PER_DAY)) / 2.0
    for centre, width, height in _PEAKS:
        level = level + height * np.exp(-0.5 * (_cyclic_distance(s, centre) / width) ** 2)
    return level


def volume_profile(slot, peak_height: float = 4.0, peak_width: float = 3.0) -> np.ndarray:
    """Counter volume at (fractional, cyclic) slot positions, in units of the off-peak level"""
    s = np.asarray(slot, dtype=np.float64) % SLOTS_PER_DAY
    level = np.ones_like(s)
    for centre, share in _RUSH_HOURS:
        bump = np.exp(-0.5 * (_cyclic_distance(s, centre) / peak_width) ** 2)
        level = level + share * peak_height * bump
    return level


def _road_graph(spec: SyntheticSpec, rng: np.random.Generator) -> RoadGraph:
    ring = nx.connected_watts_strogatz_graph(
        spec.n_nodes, spec.neighbours, spec.rewire, tries=1000, seed=int(rng.integers(2**31))
    )
    counters = set(rng.choice(spec.n_nodes, size=spec.n_counters, replace=False).tolist())
    nodes = tuple(Node(id=n, is_counter=n in counters) for n in range(spec.n_nodes))

    arcs: list[tuple[int, int, bool]] = []
    for u, v in sorted(tuple(sorted(e)) for e in ring.edges()):
        if rng.random() < spec.oneway_rate:
            arcs.append((u, v, True) if rng.random() < 0.5 else (v, u, True))
        else:
            arcs.extend([(u, v, False), (v, u, False)])

    directed = nx.DiGraph()
    directed.add_nodes_from(range(spec.n_nodes))
    directed.add_edges_from((u, v) for u, v, _ in arcs)
    betweenness = nx.edge_betweenness_centrality(directed, normalized=True)

    edges = []
    for edge_id, (u, v, oneway) in enumerate(arcs):
        maxspeed = float(rng.choice(_MAXSPEEDS))
        edges.append(
            Edge(
                id=edge_id,
                source=u,
                sink=v,
                attributes=EdgeAttributes(
                    oneway=oneway,
                    tunnel=bool(rng.random() < 0.03),
                    highway_class=int(rng.integers(0, 6)),
                    speed_kph=round(maxspeed * float(rng.uniform(0.6, 1.0)), 1),
                    maxspeed=maxspeed,
                    lanes=int(rng.integers(1, 5)),
                    length_m=round(float(rng.uniform(30.0, 800.0)), 1),
                    highway_importance=round(float(betweenness[(u, v)]), 6),
                ),
            )
        )
    graph = RoadGraph(city=spec.city, nodes=nodes, edges=tuple(edges))
    hops = counter_hops(graph)
    edges = [
        e.model_copy(
            update={
                "attributes": e.attributes.model_copy(
                    update={"counter_distance_hops": hops[e.id]}
                )
            }
        )
        for e in edges
    ]
    segments = _supersegments(directed, spec, rng)
    return RoadGraph(city=spec.city, nodes=nodes, edges=tuple(edges), supersegments=segments)


def _supersegments(
    directed: nx.DiGraph, spec: SyntheticSpec, rng: np.random.Generator
) -> tuple[SuperSegment, ...]:
    """Random self-avoiding directed walks of the configured node count"""
    lo, hi = spec.supersegment_nodes
    paths: list[tuple[int, ...]] = []
    seen: set[tuple[int, ...]] = set()
    attempts = 0
    while len(paths) < spec.n_supersegments:
        attempts += 1
        if attempts > 200 * spec.n_supersegments:
            raise GraphError(
                f"Found only {len(paths)} of {spec.n_supersegments} super-segment walks"
            )
        length = int(rng.integers(lo, hi + 1))
        path = [int(rng.integers(spec.n_nodes))]
        while len(path) < length:
            options = sorted(n for n in directed.successors(path[-1]) if n not in path)
            if not options:
                break
            path.append(int(rng.choice(options)))
        walk = tuple(path)
        if len(walk) == length and walk not in seen:
            seen.add(walk)
            paths.append(walk)
    return tuple(SuperSegment(id=i, node_path=p) for i, p in enumerate(paths))


def _congestion_class(level: float, red: float, yellow: float) -> int:
    if level >= red:
        return CongestionClass.RED.value
    if level >= yellow:
        return CongestionClass.YELLOW.value
    return CongestionClass.GREEN.value


def generate_city(spec: SyntheticSpec) -> Dataset:
    """Generate a dataset whose snapshots carry their planted contexts.

    Only `spec.labelled_snapshots_per_day` snapshots of each day get labels; the others come
    with empty label lists.

    Raises:
        GraphError: the graph cannot host the requested super-segments.
    """
    rng = np.random.default_rng(spec.seed)
    graph = _road_graph(spec, rng)
    violations = validate_graph(graph)
    if violations:
        raise GraphError(f"Generated graph is invalid: {violations[0]}")

    counters = graph.counter_ids
    amplitude = spec.amplitude * rng.uniform(0.5, 1.5, size=len(counters))
    spread = rng.permutation(len(counters)) * (SLOTS_PER_DAY / len(counters))
    phase = spread + rng.uniform(-spec.phase_jitter, spec.phase_jitter, size=len(counters))
    sensitivity = rng.uniform(0.4, 1.3, size=len(graph.edges))
    offset = rng.uniform(-0.15, 0.15, size=len(graph.edges))
    jitter = spec.edge_phase_jitter
    edge_phase = rng.uniform(-jitter, jitter, size=len(graph.edges))
    eta_base = rng.uniform(*spec.eta_base, size=len(graph.supersegments))
    factors = np.asarray(spec.weekday_factors)
    red, yellow = spec.congestion_thresholds

    snapshots, labels = [], []
    lags = np.arange(1, NUM_LAGS + 1)
    for day_index in range(spec.days):
        day = spec.start + timedelta(days=day_index)
        if spec.snapshots_per_day == SLOTS_PER_DAY:
            slots = np.arange(SLOTS_PER_DAY)
        else:
            slots = np.sort(rng.choice(SLOTS_PER_DAY, size=spec.snapshots_per_day, replace=False))
        picked = rng.choice(slots, size=spec.labelled_snapshots_per_day, replace=False)
        labelled_slots = set(picked.tolist())

        # Lag k reads slot - k, which may fall on the previous day
        absolute = day_index * SLOTS_PER_DAY + slots[:, None] - lags[None, :]
        lag_day = np.floor_divide(absolute, SLOTS_PER_DAY)
        lag_slot = absolute - lag_day * SLOTS_PER_DAY
        lag_dow = (day.weekday() + (lag_day - day_index)) % 7
        scale = factors[lag_dow] * (1.0 + spec.daily_trend * lag_day)

        # (slot, counter, lag)
        shape = volume_profile(
            lag_slot[:, None, :] - phase[None, :, None], spec.peak_height, spec.peak_width
        )
        signal = amplitude[None, :, None] * shape * scale[:, None, :]
        noise = spec.noise * amplitude[None, :, None] * rng.standard_normal(signal.shape)
        volumes = np.round(np.maximum(signal + noise, 0.0))
        missing = rng.random(volumes.shape) < spec.missing_rate

        for s, slot in enumerate(slots.tolist()):
            sid = snapshot_id(day, slot)
            snapshots.append(
                CounterSnapshot(
                    snapshot_id=sid,
                    city=spec.city,
                    day=day,
                    true_context=TimeContext.from_timestamp(day, slot),
                    volumes={
                        node: tuple(
                            None if gap else float(v)
                            for v, gap in zip(volumes[s, i], missing[s, i])
                        )
                        for i, node in enumerate(counters)
                    },
                )
            )
            if slot not in labelled_slots:
                labels.append(SnapshotLabels(snapshot_id=sid))
                continue

            level = (
                sensitivity * day_profile(slot + edge_phase) * factors[day.weekday()]
                + offset
                + spec.congestion_noise * rng.standard_normal(len(graph.edges))
            )
            labelled = rng.random(len(graph.edges)) < spec.label_rate
            congestion = [
                CongestionLabel(
                    edge_id=edge.id,
                    cc=_congestion_class(float(level[i]), red, yellow) if labelled[i] else IGNORE,
                )
                for i, edge in enumerate(graph.edges)
            ]

            wave = 1.0 + spec.eta_modulation * np.sin(2.0 * np.pi * slot / SLOTS_PER_DAY)
            etas = eta_base * wave + spec.eta_noise * eta_base * rng.standard_normal(eta_base.size)
            etas = np.round(np.maximum(etas, 1.0), 1)
            observed = rng.random(eta_base.size) < spec.label_rate
            eta = [
                EtaLabel(supersegment_id=segment.id, eta=float(etas[i]))
                for i, segment in enumerate(graph.supersegments)
                if observed[i]
            ]
            labels.append(SnapshotLabels(snapshot_id=sid, congestion=congestion, eta=eta))

    logger.info(
        "Generated city '%s': %d edges, %d counters, %d snapshots (%d labelled) over %d days",
        spec.city, len(graph.edges), len(counters), len(snapshots),
        spec.labelled_snapshots_per_day * spec.days, spec.days,
    )
    return Dataset(graph=graph, snapshots=tuple(snapshots), labels=tuple(labels))
