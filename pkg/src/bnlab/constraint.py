"""Conditional independence testing and the PC-Stable structure learner.

The test statistic is G2 (the log likelihood ratio) against a chi-square
reference, with degrees of freedom reduced for sparse strata.  The skeleton
phase freezes adjacency sets per level, which makes edge deletions within a
level independent of processing order; pairs and candidate separating sets
are additionally enumerated in label order, so the whole output (not just
the skeleton) is invariant to column permutations of the input.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
from scipy.stats import chi2

from .data import CategoricalDataset
from .graphs import Edge, MixedGraph


class InsufficientData(ValueError):
    """No observations at all; the test statistic is undefined."""


@dataclass(frozen=True)
class CiTestResult:
    statistic: float
    dof: int
    p_value: float


SepsetMap = dict  # frozenset({x, y}) -> tuple of separating labels


def g2_test(
    x: str,
    y: str,
    z: Sequence[str],
    data: CategoricalDataset,
) -> CiTestResult:
    """G2 independence test of x and y stratified by the variables in z.

    Each stratum contributes 2 * sum O ln(O/E) and (r_x-1)(r_y-1) degrees of
    freedom less one per all-zero row or column; empty strata contribute
    nothing.  The total dof is floored at 1.
    """
    if x == y or x in z or y in z:
        raise ValueError("test variables must be distinct from the conditioning set")
    data.require_complete()
    n = data.row_count
    if n == 0:
        raise InsufficientData("no rows")
    codes = data.codes
    xi, yi = data.index_of(x), data.index_of(y)
    rx = len(data.states_of(x))
    ry = len(data.states_of(y))
    zi = [data.index_of(v) for v in z]
    if zi:
        dims = [len(data.states_of(v)) for v in z]
        cfg = np.ravel_multi_index(tuple(codes[:, i] for i in zi), dims)
        _, cfg = np.unique(cfg, return_inverse=True)
        cfg = cfg.reshape(-1)
        n_cfg = int(cfg.max()) + 1
    else:
        cfg = np.zeros(n, dtype=np.int64)
        n_cfg = 1
    counts = np.bincount(
        (cfg * rx + codes[:, xi]) * ry + codes[:, yi], minlength=n_cfg * rx * ry
    ).reshape(n_cfg, rx, ry)

    stat = 0.0
    dof = 0
    for table in counts:
        total = table.sum()
        if total == 0:
            continue
        rows = table.sum(axis=1)
        cols = table.sum(axis=0)
        zero_rows = int((rows == 0).sum())
        zero_cols = int((cols == 0).sum())
        dof += max((rx - 1) * (ry - 1) - zero_rows - zero_cols, 0)
        expected = np.outer(rows, cols) / total
        mask = table > 0
        stat += 2.0 * float(
            (table[mask] * np.log(table[mask] / expected[mask])).sum()
        )
    dof = max(dof, 1)
    return CiTestResult(statistic=stat, dof=dof, p_value=float(chi2.sf(stat, dof)))


def pc_stable(
    data: CategoricalDataset,
    alpha: float = 0.05,
    max_condition: int = 3,
) -> tuple[MixedGraph, SepsetMap]:
    """Skeleton by level-wise conditional independence pruning, then collider
    orientation from the recorded separating sets.

    Starts from the complete undirected graph; at level l an edge x - y is
    removed when some size-l subset of either endpoint's frozen adjacency set
    accepts independence (p > alpha).  A test that cannot be computed keeps
    the edge.  The returned graph directs exactly the v-structure edges
    (z not in sepset(x, y) orients x -> z <- y); conflicting colliders are
    applied first-writer-wins in label order, and no further orientation
    propagation is performed.
    """
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie strictly between 0 and 1")
    data.require_complete()
    labels = sorted(data.names)
    adj: dict[str, set[str]] = {v: set(labels) - {v} for v in labels}
    sepsets: SepsetMap = {}

    for level in range(max_condition + 1):
        frozen = {v: sorted(adj[v]) for v in labels}
        if all(len(frozen[v]) - 1 < level for v in labels):
            break
        for v in labels:
            for w in frozen[v]:
                if w not in adj[v]:
                    continue  # removed earlier this level
                candidates = [u for u in frozen[v] if u != w]
                if len(candidates) < level:
                    continue
                for s in itertools.combinations(candidates, level):
                    try:
                        result = g2_test(v, w, list(s), data)
                    except InsufficientData:
                        continue
                    if result.p_value > alpha:
                        adj[v].discard(w)
                        adj[w].discard(v)
                        sepsets[frozenset((v, w))] = s
                        break

    kinds: dict[tuple[str, str], str] = {}
    for v in labels:
        for w in adj[v]:
            if v < w:
                kinds[(v, w)] = "und"

    # candidate colliders x -> z <- y, lexicographic on (x, y, z)
    triples = []
    for x, y in itertools.combinations(labels, 2):
        if y in adj[x]:
            continue
        sep = sepsets.get(frozenset((x, y)))
        if sep is None:
            continue
        for z in sorted(adj[x] & adj[y]):
            if z not in sep:
                triples.append((x, y, z))
    triples.sort()

    def orient(src: str, dst: str) -> None:
        key = (src, dst) if src < dst else (dst, src)
        if kinds.get(key) != "und":
            return  # an earlier collider already directed this edge
        kinds[key] = "fwd" if src < dst else "bwd"

    for x, y, z in triples:
        orient(x, z)
        orient(y, z)

    edges = []
    for (a, b), kind in kinds.items():
        if kind == "und":
            edges.append(Edge.undirected(a, b))
        elif kind == "fwd":
            edges.append(Edge.directed(a, b))
        else:
            edges.append(Edge.directed(b, a))
    return MixedGraph(tuple(data.names), edges), sepsets
