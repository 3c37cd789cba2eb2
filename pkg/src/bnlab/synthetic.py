"""Synthetic ground-truth networks and forward sampling.

Recovery experiments need generating networks whose dependencies are strong
enough to be detectable at realistic sample sizes; a network whose CPT rows
happen to cancel into near-independence (parity-like structure) would make
any learner look broken.  ``identifiable_random_bn`` therefore rejection-
samples networks until every adjacent pair keeps conditional mutual
information above a floor for all small conditioning sets.  Two optional
screens tighten this from "detectable" to "recoverable by the learners we
ship": greedy identifiability (BIC ascent on the exact distribution reaches
the true equivalence class, ruling out collider traps that no amount of data
fixes) and multiply-witnessed separations (every non-adjacent pair has at
least k exactly-separating conditioning sets, so a single fluked independence
test cannot leave a false edge behind).
"""

from __future__ import annotations

import itertools
import math
from typing import Mapping, Sequence

import numpy as np

from .bn import Cpt, DiscreteBn
from .data import CategoricalDataset, Column
from .graphs import Dag, Edge, dag_to_cpdag
from .scores import GAIN_TIE_EPS


def random_dag(
    labels: Sequence[str], rng: np.random.Generator, edge_prob: float = 0.5
) -> Dag:
    """DAG whose orientation follows a uniformly random topological order."""
    order = list(labels)
    rng.shuffle(order)
    edges = []
    for i, j in itertools.combinations(range(len(order)), 2):
        if rng.random() < edge_prob:
            edges.append(Edge.directed(order[i], order[j]))
    return Dag(tuple(labels), edges)


def random_bn(
    dag: Dag,
    arities: Mapping[str, int],
    rng: np.random.Generator,
    strength: float = 0.85,
) -> DiscreteBn:
    """Parameterize ``dag`` with rows that put ``strength`` mass on one
    randomly chosen state and spread the rest uniformly."""
    if not 0.5 < strength < 1:
        raise ValueError("strength must lie in (0.5, 1)")
    cpts = {}
    states = DiscreteBn.uniform_states(arities)
    for node in dag.nodes:
        parents = tuple(dag.parents(node))
        r = arities[node]
        q = 1
        for p in parents:
            q *= arities[p]
        table = np.full((q, r), (1 - strength) / (r - 1))
        dominant = rng.integers(0, r, size=q)
        table[np.arange(q), dominant] = strength
        cpts[node] = Cpt(node, parents, table)
    return DiscreteBn(dag, cpts, states)


def joint_distribution(bn: DiscreteBn) -> np.ndarray:
    """Full joint table with one axis per node, in graph node order."""
    names = list(bn.graph.nodes)
    card = [bn.cardinality(n) for n in names]
    joint = np.ones(card)
    for node in names:
        cpt = bn.cpts[node]
        scope = cpt.parents + (node,)
        dims = [bn.cardinality(v) for v in scope]
        factor = cpt.table.reshape(dims)
        positions = [scope.index(names[i]) for i in range(len(names)) if names[i] in scope]
        ordered = np.transpose(factor, positions)
        shape = [card[i] if names[i] in scope else 1 for i in range(len(names))]
        joint = joint * ordered.reshape(shape)
    return joint


def exact_conditional_mi(
    joint: np.ndarray, x: int, y: int, given: Sequence[int] = ()
) -> float:
    """I(X;Y | Z) in nats from a full joint table (axes = variables)."""
    keep = sorted({x, y, *given})
    drop = tuple(a for a in range(joint.ndim) if a not in keep)
    sub = joint.sum(axis=drop) if drop else joint
    pi, pj = keep.index(x), keep.index(y)
    moved = np.moveaxis(sub, (pi, pj), (0, 1))
    t = moved.reshape(moved.shape[0], moved.shape[1], -1)
    pz = t.sum(axis=(0, 1))
    pxz = t.sum(axis=1)
    pyz = t.sum(axis=0)
    mask = t > 0
    num = t * pz[None, None, :]
    den = pxz[:, None, :] * pyz[None, :, :]
    return float((t[mask] * np.log(num[mask] / den[mask])).sum())


def family_entropy(joint: np.ndarray, child: int, parents: Sequence[int] = ()) -> float:
    """H(child | parents) in nats from a full joint table (axes = variables)."""
    keep = sorted({child, *parents})
    drop = tuple(a for a in range(joint.ndim) if a not in keep)
    sub = joint.sum(axis=drop) if drop else joint
    pz = sub.sum(axis=keep.index(child), keepdims=True)
    mask = sub > 0
    return -float((sub[mask] * np.log(sub[mask] / np.broadcast_to(pz, sub.shape)[mask])).sum())


def population_hill_climb(bn: DiscreteBn, n: int) -> Dag:
    """Greedy BIC ascent against the exact joint of ``bn``.

    Mirrors the sample-based search move for move (same enumeration order,
    same tie rule) but with infinite-data family likelihoods -n * H(child |
    parents) in place of counts, so the result is a property of the
    distribution alone: whether BIC ascent from the empty graph can reach the
    true equivalence class at sample size ``n``, noise aside.
    """
    joint = joint_distribution(bn)
    names = list(bn.graph.nodes)
    p = len(names)
    card = [bn.cardinality(x) for x in names]
    half_log_n = math.log(n) / 2.0

    def fam_bic(y: int, pa: frozenset) -> float:
        q = 1
        for x in pa:
            q *= card[x]
        return -n * family_entropy(joint, y, tuple(pa)) - half_log_n * (card[y] - 1) * q

    parents: list[set] = [set() for _ in range(p)]
    children: list[set] = [set() for _ in range(p)]
    local = [fam_bic(y, frozenset()) for y in range(p)]

    def has_path(src: int, dst: int, skip_edge: tuple | None = None) -> bool:
        stack, seen = [src], {src}
        while stack:
            u = stack.pop()
            if u == dst:
                return True
            for v in children[u]:
                if skip_edge != (u, v) and v not in seen:
                    seen.add(v)
                    stack.append(v)
        return False

    for _ in range(4 * p * p):
        best = None
        best_gain = 0.0
        for y in range(p):
            for x in range(p):
                if x == y or x in parents[y] or has_path(y, x):
                    continue
                gain = fam_bic(y, frozenset(parents[y] | {x})) - local[y]
                if gain > best_gain + GAIN_TIE_EPS:
                    best, best_gain = ("add", x, y), gain
        for y in range(p):
            for x in sorted(parents[y]):
                gain = fam_bic(y, frozenset(parents[y] - {x})) - local[y]
                if gain > best_gain + GAIN_TIE_EPS:
                    best, best_gain = ("delete", x, y), gain
        for y in range(p):
            for x in sorted(parents[y]):
                if has_path(x, y, skip_edge=(x, y)):
                    continue
                gain = (
                    fam_bic(y, frozenset(parents[y] - {x})) - local[y]
                    + fam_bic(x, frozenset(parents[x] | {y})) - local[x]
                )
                if gain > best_gain + GAIN_TIE_EPS:
                    best, best_gain = ("reverse", x, y), gain
        if best is None:
            break
        kind, x, y = best
        if kind == "add":
            parents[y].add(x)
            children[x].add(y)
        elif kind == "delete":
            parents[y].discard(x)
            children[x].discard(y)
        else:
            parents[y].discard(x)
            children[x].discard(y)
            parents[x].add(y)
            children[y].add(x)
        local[y] = fam_bic(y, frozenset(parents[y]))
        local[x] = fam_bic(x, frozenset(parents[x]))
    return Dag(
        tuple(names),
        [Edge.directed(names[x], names[y]) for y in range(p) for x in sorted(parents[y])],
    )


def separation_witnesses(
    bn: DiscreteBn, a: str, b: str, max_condition: int = 3, tol: float = 1e-12
) -> set:
    """Conditioning sets that exactly separate a non-adjacent pair.

    Restricted to subsets of either endpoint's true neighborhood, the pool a
    level-wise constraint learner actually draws from once the skeleton is
    right.  Returns frozensets of node names.
    """
    joint = joint_distribution(bn)
    names = list(bn.graph.nodes)
    idx = {x: i for i, x in enumerate(names)}
    found = set()
    for base, other in ((a, b), (b, a)):
        pool = sorted(set(bn.graph.neighbors(base)) - {other})
        for size in range(0, min(max_condition, len(pool)) + 1):
            for ks in itertools.combinations(pool, size):
                S = frozenset(ks)
                if S in found:
                    continue
                if exact_conditional_mi(joint, idx[a], idx[b], tuple(idx[s] for s in ks)) < tol:
                    found.add(S)
    return found


def identifiable_random_bn(
    labels: Sequence[str],
    arities: Mapping[str, int],
    rng: np.random.Generator,
    edge_prob: float = 0.5,
    strength: float = 0.85,
    min_cmi: float = 0.02,
    max_condition: int = 2,
    min_edges: int = 1,
    max_tries: int = 500,
    greedy_check_n: int | None = None,
    min_sepset_witnesses: int = 0,
) -> DiscreteBn:
    """Random BN whose every edge stays detectable under conditioning.

    Draws (graph, parameters) pairs until, for every adjacent pair, the
    conditional mutual information given any other-variable subset of size up
    to ``max_condition`` is at least ``min_cmi``.  With ``greedy_check_n``
    set, additionally requires ``population_hill_climb`` at that sample size
    to recover the true equivalence class; with ``min_sepset_witnesses`` > 0,
    requires every non-adjacent pair to have at least that many
    ``separation_witnesses`` (conditioning sets up to ``max_condition``).
    """
    names = list(labels)
    for _ in range(max_tries):
        dag = random_dag(names, rng, edge_prob)
        if dag.edge_count < min_edges:
            continue
        bn = random_bn(dag, arities, rng, strength)
        joint = joint_distribution(bn)
        idx = {n: i for i, n in enumerate(bn.graph.nodes)}
        ok = True
        for src, dst in dag.directed_pairs():
            others = [idx[n] for n in names if n not in (src, dst)]
            for size in range(0, max_condition + 1):
                for ks in itertools.combinations(others, size):
                    if exact_conditional_mi(joint, idx[src], idx[dst], ks) < min_cmi:
                        ok = False
                        break
                if not ok:
                    break
            if not ok:
                break
        if not ok:
            continue
        if greedy_check_n is not None and dag_to_cpdag(
            population_hill_climb(bn, greedy_check_n)
        ) != dag_to_cpdag(dag):
            continue
        if min_sepset_witnesses > 0 and any(
            len(separation_witnesses(bn, a, b, max_condition)) < min_sepset_witnesses
            for a, b in itertools.combinations(names, 2)
            if b not in bn.graph.neighbors(a)
        ):
            continue
        return bn
    raise RuntimeError("no identifiable network found within the try budget")


def sample(bn: DiscreteBn, n: int, rng: np.random.Generator) -> CategoricalDataset:
    """Forward-sample ``n`` complete rows in graph node order."""
    names = list(bn.graph.nodes)
    col = {name: i for i, name in enumerate(names)}
    codes = np.zeros((n, len(names)), dtype=np.int64)
    for node in bn.graph.topological_order():
        cpt = bn.cpts[node]
        if cpt.parents:
            dims = [bn.cardinality(p) for p in cpt.parents]
            cfg = np.ravel_multi_index(
                tuple(codes[:, col[p]] for p in cpt.parents), dims
            )
        else:
            cfg = np.zeros(n, dtype=np.int64)
        cum = np.cumsum(cpt.table[cfg], axis=1)
        u = rng.random(n)
        codes[:, col[node]] = (u[:, None] >= cum).sum(axis=1)
    columns = [
        Column(name, "categorical", tuple(int(v) for v in codes[:, j]), bn.states[name])
        for j, name in enumerate(names)
    ]
    return CategoricalDataset(columns)
