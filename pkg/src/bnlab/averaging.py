"""Consensus structure from many learnt graphs.

Edges are tallied per kind across the input graphs (circle marks count as
their directed/undirected counterparts), then a threshold theta picks which
edges enter the consensus DAG.  Directed edges are placed first in descending
occurrence order, undirected edges second with a deterministic orientation,
and directed edges that had to be reversed to avoid a cycle get a final
chance.  Bidirected edges never enter the consensus; they have their own
summary with a near-miss band one count below the threshold.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .graphs import Dag, Edge, MixedGraph, NodeUniverseMismatch, is_acyclic

logger = logging.getLogger(__name__)

# Occurrence thresholds published alongside the averaging procedure for its
# seven group sizes.  All but the last agree with ceil(n/3); 31 -> 10 is kept
# verbatim rather than silently corrected to 11.
PUBLISHED_THETAS: Mapping[int, int] = {
    4: 2,
    5: 2,
    9: 3,
    14: 5,
    17: 6,
    19: 7,
    31: 10,
}


def default_theta(n_graphs: int, use_table: bool = False) -> int:
    """Threshold = ceil(n/3); with ``use_table`` the published per-size values
    take precedence where they exist."""
    if n_graphs < 1:
        raise ValueError("need at least one graph")
    if use_table and n_graphs in PUBLISHED_THETAS:
        return PUBLISHED_THETAS[n_graphs]
    return math.ceil(n_graphs / 3)


@dataclass(frozen=True)
class EdgeTally:
    """Occurrence counts per edge kind; reverse directions tracked separately."""

    nodes: tuple[str, ...]
    directed: Mapping[tuple[str, str], int]
    undirected: Mapping[frozenset, int]
    bidirected: Mapping[frozenset, int]
    graph_count: int


@dataclass(frozen=True)
class AverageConfig:
    theta: int
    node_order: tuple[str, ...] | None = None  # default: sorted labels

    def __post_init__(self):
        if self.theta < 1:
            raise ValueError("theta must be at least 1")


def tally_edges(graphs: Sequence[MixedGraph]) -> EdgeTally:
    if not graphs:
        raise ValueError("need at least one graph")
    universe = set(graphs[0].nodes)
    for g in graphs[1:]:
        if set(g.nodes) != universe:
            raise NodeUniverseMismatch(
                f"graph node sets differ: {sorted(universe ^ set(g.nodes))}"
            )
    directed: dict[tuple[str, str], int] = {}
    undirected: dict[frozenset, int] = {}
    bidirected: dict[frozenset, int] = {}
    for g in graphs:
        norm = g.normalize_circles()
        for src, dst in norm.directed_pairs():
            directed[(src, dst)] = directed.get((src, dst), 0) + 1
        for a, b in norm.undirected_pairs():
            key = frozenset((a, b))
            undirected[key] = undirected.get(key, 0) + 1
        for a, b in norm.bidirected_pairs():
            key = frozenset((a, b))
            bidirected[key] = bidirected.get(key, 0) + 1
    return EdgeTally(
        nodes=tuple(sorted(universe)),
        directed=directed,
        undirected=undirected,
        bidirected=bidirected,
        graph_count=len(graphs),
    )


def _resolve_order(tally: EdgeTally, cfg: AverageConfig) -> tuple[str, ...]:
    if cfg.node_order is None:
        return tuple(sorted(tally.nodes))
    if set(cfg.node_order) != set(tally.nodes):
        raise NodeUniverseMismatch("node_order does not cover the node universe")
    return tuple(cfg.node_order)


def average_graphs(graphs: Sequence[MixedGraph], cfg: AverageConfig) -> Dag:
    """Threshold-and-orient consensus; the result is always a DAG.

    Step 1 adds qualifying directed edges from the most frequent down,
    skipping an edge whose reverse is already placed and reversing (into a
    retry set) any edge that would close a cycle.  Step 2 adds qualifying
    undirected edges between still-unconnected pairs, oriented from the
    earlier node in the node order (flipped on a cycle).  Step 3 retries the
    reversed edges and drops any that still cycle.
    """
    tally = tally_edges(graphs)
    order = _resolve_order(tally, cfg)
    rank = {lab: i for i, lab in enumerate(order)}
    placed: dict[tuple[str, str], None] = {}  # insertion-ordered edge set
    pairs_placed: set[frozenset] = set()

    def creates_cycle(src: str, dst: str) -> bool:
        g = MixedGraph(
            order, [Edge.directed(a, b) for a, b in placed] + [Edge.directed(src, dst)]
        )
        return not is_acyclic(g)

    def place(src: str, dst: str) -> None:
        placed[(src, dst)] = None
        pairs_placed.add(frozenset((src, dst)))

    retry: list[tuple[str, str]] = []
    step1 = sorted(
        (pair for pair, n in tally.directed.items() if n >= cfg.theta),
        key=lambda p: (-tally.directed[p], rank[p[0]], rank[p[1]]),
    )
    for src, dst in step1:
        if (dst, src) in placed:
            continue
        if creates_cycle(src, dst):
            retry.append((dst, src))
            continue
        place(src, dst)

    step2 = sorted(
        (pair for pair, n in tally.undirected.items() if n >= cfg.theta),
        key=lambda p: (-tally.undirected[p], *sorted(rank[x] for x in p)),
    )
    for pair in step2:
        if pair in pairs_placed:
            continue
        a, b = sorted(pair, key=rank.__getitem__)
        if creates_cycle(a, b):
            a, b = b, a
        place(a, b)

    for src, dst in retry:
        if frozenset((src, dst)) in pairs_placed:
            continue
        if creates_cycle(src, dst):
            logger.warning(
                "dropping consensus edge %s -> %s: both directions cycle", src, dst
            )
            continue
        place(src, dst)

    return Dag(order, [Edge.directed(a, b) for a, b in placed])


@dataclass(frozen=True)
class BidirectedConsensus:
    edges: tuple[tuple[str, str], ...]
    near_misses: tuple[tuple[str, str], ...]  # exactly one count short


def average_bidirected(
    graphs: Sequence[MixedGraph], cfg: AverageConfig
) -> BidirectedConsensus:
    """Bidirected pairs meeting theta, plus the pairs missing it by one."""
    tally = tally_edges(graphs)
    order = _resolve_order(tally, cfg)
    rank = {lab: i for i, lab in enumerate(order)}

    def as_pair(key: frozenset) -> tuple[str, str]:
        a, b = sorted(key, key=rank.__getitem__)
        return (a, b)

    hits = sorted(
        (as_pair(k) for k, n in tally.bidirected.items() if n >= cfg.theta),
        key=lambda p: (rank[p[0]], rank[p[1]]),
    )
    near = sorted(
        (as_pair(k) for k, n in tally.bidirected.items() if n == cfg.theta - 1),
        key=lambda p: (rank[p[0]], rank[p[1]]),
    )
    return BidirectedConsensus(edges=tuple(hits), near_misses=tuple(near))


def consensus_annotations(tally: EdgeTally, consensus: Dag) -> dict[frozenset, str]:
    """Per-pair occurrence notes for the graph writer, Figure-label style."""
    notes: dict[frozenset, str] = {}
    for src, dst in consensus.directed_pairs():
        fwd = tally.directed.get((src, dst), 0)
        rev = tally.directed.get((dst, src), 0)
        und = tally.undirected.get(frozenset((src, dst)), 0)
        parts = [f"{src}->{dst} x{fwd}"]
        if rev:
            parts.append(f"{dst}->{src} x{rev}")
        if und:
            parts.append(f"undirected x{und}")
        notes[frozenset((src, dst))] = ", ".join(parts)
    return notes
