"""
Road graph checks and graph-derived attributes.
"""

from collections import Counter
from typing import Annotated, Optional

import networkx as nx
from pydantic import Field, validate_call

from .models import WEEKEND_DAYS, RoadGraph, Violation


@validate_call
def weekend_flag(day_of_week: Annotated[int, Field(ge=0, le=6)]) -> bool:
    """Whether a day of the week (0 = Monday) falls on the weekend.

    Raises:
        pydantic.ValidationError: day_of_week outside [0, 6].
    """
    return day_of_week in WEEKEND_DAYS


def validate_graph(graph: RoadGraph) -> list[Violation]:
    """Check every RoadGraph invariant.

    Args:
        graph (RoadGraph): graph to check; never modified.

    Returns:
        list[Violation]: one entry per broken invariant, empty when the graph is valid.
    """
    violations: list[Violation] = []

    for entity, ids in (
        ("node", [n.id for n in graph.nodes]),
        ("edge", graph.edge_ids),
        ("supersegment", graph.supersegment_ids),
    ):
        for entity_id, count in Counter(ids).items():
            if count > 1:
                violations.append(
                    Violation(
                        entity=entity,
                        entity_id=entity_id,
                        message=f"duplicate id appears {count} times",
                    )
                )

    node_ids = {n.id for n in graph.nodes}
    for edge in graph.edges:
        missing = [n for n in (edge.source, edge.sink) if n not in node_ids]
        if missing:
            violations.append(
                Violation(
                    entity="edge",
                    entity_id=edge.id,
                    message=f"references absent node(s) {missing}",
                )
            )

    pairs = graph.endpoint_pairs()
    for segment in graph.supersegments:
        broken = [p for p in segment.node_pairs if p not in pairs]
        if broken:
            violations.append(
                Violation(
                    entity="supersegment",
                    entity_id=segment.id,
                    message=f"node pairs without an edge: {broken}",
                )
            )

    return violations


def to_networkx(graph: RoadGraph) -> nx.DiGraph:
    """Directed networkx view of the graph (node attribute `is_counter`)"""
    g = nx.DiGraph()
    for node in graph.nodes:
        g.add_node(node.id, is_counter=node.is_counter)
    for edge in graph.edges:
        g.add_edge(edge.source, edge.sink, id=edge.id)
    return g


def counter_hops(graph: RoadGraph) -> dict[int, Optional[int]]:
    """Hop distance from each edge to the closest counter node.

    Distances ignore edge direction and are measured from the nearer endpoint of the
    edge, so an edge touching a counter has distance 0.

    Returns:
        dict[int, Optional[int]]: edge id -> hops, None when no counter is reachable.
    """
    counters = graph.counter_ids
    if not counters:
        return {e.id: None for e in graph.edges}

    g = to_networkx(graph).to_undirected(as_view=True)
    distance = nx.multi_source_dijkstra_path_length(g, counters)
    hops: dict[int, Optional[int]] = {}
    for edge in graph.edges:
        reached = [distance[n] for n in (edge.source, edge.sink) if n in distance]
        hops[edge.id] = int(min(reached)) if reached else None
    return hops
