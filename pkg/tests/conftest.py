"""Shared fixtures and hypothesis strategies."""

from __future__ import annotations

import itertools

import numpy as np
import pytest
from hypothesis import strategies as st

from bnlab.graphs import Dag, Edge, MixedGraph

LABELS6 = tuple("ABCDEF")


def random_dag(rng: np.random.Generator, labels, edge_prob: float = 0.4) -> Dag:
    """DAG via a random topological order over ``labels``."""
    order = list(labels)
    rng.shuffle(order)
    edges = []
    for i, j in itertools.combinations(range(len(order)), 2):
        if rng.random() < edge_prob:
            edges.append(Edge.directed(order[i], order[j]))
    return Dag(tuple(labels), edges)


def random_mixed_graph(rng: np.random.Generator, labels, edge_prob: float = 0.4) -> MixedGraph:
    """Arbitrary mixed graph: each pair none/directed/reversed/undirected/bidirected."""
    edges = []
    for a, b in itertools.combinations(labels, 2):
        if rng.random() >= edge_prob:
            continue
        kind = rng.integers(0, 4)
        if kind == 0:
            edges.append(Edge.directed(a, b))
        elif kind == 1:
            edges.append(Edge.directed(b, a))
        elif kind == 2:
            edges.append(Edge.undirected(a, b))
        else:
            edges.append(Edge.bidirected(a, b))
    return MixedGraph(tuple(labels), edges)


@st.composite
def dags(draw, max_nodes: int = 5):
    n = draw(st.integers(min_value=1, max_value=max_nodes))
    labels = LABELS6[:n]
    edges = []
    for i, j in itertools.combinations(range(n), 2):
        c = draw(st.integers(min_value=0, max_value=2))
        if c == 1:
            edges.append(Edge.directed(labels[i], labels[j]))
        elif c == 2:
            edges.append(Edge.directed(labels[j], labels[i]))
    # orientation follows a fixed topological order unless reversed pairs
    # happen to be acyclic anyway; rebuild against that order
    order = draw(st.permutations(range(n)))
    pos = {labels[node]: rank for rank, node in enumerate(order)}
    fixed = [
        Edge.directed(e.source, e.target)
        if pos[e.source] < pos[e.target]
        else Edge.directed(e.target, e.source)
        for e in edges
    ]
    return Dag(labels, fixed)


@st.composite
def mixed_graphs(draw, max_nodes: int = 5):
    n = draw(st.integers(min_value=1, max_value=max_nodes))
    labels = LABELS6[:n]
    edges = []
    for a, b in itertools.combinations(labels, 2):
        c = draw(st.integers(min_value=0, max_value=4))
        if c == 1:
            edges.append(Edge.directed(a, b))
        elif c == 2:
            edges.append(Edge.directed(b, a))
        elif c == 3:
            edges.append(Edge.undirected(a, b))
        elif c == 4:
            edges.append(Edge.bidirected(a, b))
    return MixedGraph(labels, edges)


@pytest.fixture
def rng():
    return np.random.default_rng(20260813)


@pytest.fixture
def demo_files(tmp_path):
    """A learnable 4-node network sampled to disk: table, schema, true graph."""
    from bnlab.data import write_schema, write_table
    from bnlab.graph_io import write_graph_file
    from bnlab.synthetic import identifiable_random_bn, sample

    gen = np.random.default_rng(7341)
    bn = identifiable_random_bn(
        tuple("ABCD"), {n: 3 for n in "ABCD"}, gen, edge_prob=0.6, min_edges=3
    )
    data = sample(bn, 500, gen)
    paths = {
        "data": tmp_path / "table.csv",
        "schema": tmp_path / "schema.csv",
        "reference": tmp_path / "true.graph",
        "dir": tmp_path,
    }
    write_table(data.columns, paths["data"])
    write_schema(data.columns, paths["schema"])
    write_graph_file(bn.graph, paths["reference"])
    return {"bn": bn, "dataset": data, **paths}
