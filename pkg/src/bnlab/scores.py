"""Decomposable discrete scores (log likelihood, BIC, free parameters) and
the greedy structure searches built on them.

Scores decompose over families (child, parent set); a per-family cache makes
the add/delete/reverse move evaluation in hill climbing and tabu search a
pair of dictionary lookups.  BIC here is LL - (ln N / 2) * free_parameters,
so larger is better.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .data import CategoricalDataset
from .graphs import Dag, Edge


def free_parameters(d: Dag, arities: Mapping[str, int]) -> int:
    """Sum over nodes of (r_child - 1) * product of parent arities.

    Exact integer arithmetic; a 15-parent four-state family alone yields
    3 * 4**15 and must not lose precision.
    """
    total = 0
    for node in d.nodes:
        q = 1
        for p in d.parents(node):
            q *= arities[p]
        total += (arities[node] - 1) * q
    return total


class ScoreCache:
    """Family-wise maximized log likelihood and BIC over one dataset.

    Keys are (child index, frozenset of parent indices); values are exact
    recomputations, so a cached lookup and a fresh evaluation agree.
    """

    def __init__(self, data: CategoricalDataset):
        data.require_complete()
        self.data = data
        self.codes = data.codes
        self.arities = data.arities
        self.n = data.row_count
        self._half_log_n = math.log(self.n) / 2 if self.n > 0 else 0.0
        self._ll: dict[tuple[int, frozenset], float] = {}

    def family_ll(self, child: int, parents: frozenset) -> float:
        key = (child, parents)
        cached = self._ll.get(key)
        if cached is not None:
            return cached
        idx = sorted(parents)
        if idx:
            _, cfg = np.unique(self.codes[:, idx], axis=0, return_inverse=True)
            cfg = cfg.reshape(-1)
            ncfg = int(cfg.max()) + 1
        else:
            cfg = np.zeros(self.n, dtype=np.int64)
            ncfg = 1
        r = self.arities[child]
        counts = np.bincount(
            cfg * r + self.codes[:, child], minlength=ncfg * r
        ).reshape(ncfg, r)
        totals = counts.sum(axis=1, keepdims=True)
        mask = counts > 0
        ratios = counts[mask] / np.broadcast_to(totals, counts.shape)[mask]
        value = float((counts[mask] * np.log(ratios)).sum())
        self._ll[key] = value
        return value

    def family_params(self, child: int, parents: frozenset) -> int:
        q = 1
        for p in parents:
            q *= self.arities[p]
        return (self.arities[child] - 1) * q

    def family_bic(self, child: int, parents: frozenset) -> float:
        return self.family_ll(child, parents) - self._half_log_n * self.family_params(
            child, parents
        )


def _parent_indices(d: Dag, data: CategoricalDataset) -> dict[int, frozenset]:
    if set(d.nodes) != set(data.names):
        raise ValueError("graph nodes and dataset columns differ")
    col = {name: i for i, name in enumerate(data.names)}
    return {
        col[node]: frozenset(col[p] for p in d.parents(node)) for node in d.nodes
    }


def log_likelihood(d: Dag, data: CategoricalDataset) -> float:
    """Maximized log likelihood of the data under d's factorization."""
    cache = ScoreCache(data)
    return sum(
        cache.family_ll(child, parents)
        for child, parents in _parent_indices(d, data).items()
    )


def bic(d: Dag, data: CategoricalDataset) -> float:
    cache = ScoreCache(data)
    return sum(
        cache.family_bic(child, parents)
        for child, parents in _parent_indices(d, data).items()
    )


@dataclass(frozen=True)
class SearchConfig:
    max_iterations: int = 10000
    tabu_list_length: int = 10
    max_parents: int | None = None
    seed: int = 0
    # extra stop rule for tabu: give up after this many consecutive
    # non-improving accepted moves
    stagnation_limit: int = 30

    def __post_init__(self):
        if self.max_iterations < 1 or self.tabu_list_length < 1:
            raise ValueError("iteration and tabu lengths must be positive")
        if self.max_parents is not None and self.max_parents < 0:
            raise ValueError("max_parents must be non-negative")
        if self.stagnation_limit < 1:
            raise ValueError("stagnation_limit must be positive")


class _SearchState:
    """Mutable parent/children sets plus the decomposed score."""

    def __init__(self, cache: ScoreCache, p: int, max_parents: int | None):
        self.cache = cache
        self.p = p
        self.max_parents = max_parents
        self.parents: list[set[int]] = [set() for _ in range(p)]
        self.children: list[set[int]] = [set() for _ in range(p)]
        self.local = [cache.family_bic(i, frozenset()) for i in range(p)]

    @property
    def score(self) -> float:
        return sum(self.local)

    def has_path(self, src: int, dst: int, skip_edge: tuple[int, int] | None = None) -> bool:
        stack = [src]
        seen = {src}
        while stack:
            u = stack.pop()
            if u == dst:
                return True
            for v in self.children[u]:
                if skip_edge == (u, v):
                    continue
                if v not in seen:
                    seen.add(v)
                    stack.append(v)
        return False

    def moves(self):
        """Legal moves in deterministic order: kind, child, parent.

        Yields (kind, parent, child, gain).  Kinds sort add < delete <
        reverse; within a kind, moves order lexicographically on (child,
        parent) indices.
        """
        cache = self.cache
        for y in range(self.p):
            base = self.local[y]
            pa = self.parents[y]
            if self.max_parents is None or len(pa) < self.max_parents:
                for x in range(self.p):
                    if x == y or x in pa:
                        continue
                    if self.has_path(y, x):
                        continue
                    gain = cache.family_bic(y, frozenset(pa | {x})) - base
                    yield ("add", x, y, gain)
        for y in range(self.p):
            base = self.local[y]
            for x in sorted(self.parents[y]):
                gain = cache.family_bic(y, frozenset(self.parents[y] - {x})) - base
                yield ("delete", x, y, gain)
        for y in range(self.p):
            for x in sorted(self.parents[y]):
                if self.max_parents is not None and len(self.parents[x]) >= self.max_parents:
                    continue
                if self.has_path(x, y, skip_edge=(x, y)):
                    continue
                gain = (
                    cache.family_bic(y, frozenset(self.parents[y] - {x}))
                    - self.local[y]
                    + cache.family_bic(x, frozenset(self.parents[x] | {y}))
                    - self.local[x]
                )
                yield ("reverse", x, y, gain)

    def apply(self, kind: str, x: int, y: int) -> None:
        if kind == "add":
            self.parents[y].add(x)
            self.children[x].add(y)
            self.local[y] = self.cache.family_bic(y, frozenset(self.parents[y]))
        elif kind == "delete":
            self.parents[y].discard(x)
            self.children[x].discard(y)
            self.local[y] = self.cache.family_bic(y, frozenset(self.parents[y]))
        elif kind == "reverse":
            self.parents[y].discard(x)
            self.children[x].discard(y)
            self.parents[x].add(y)
            self.children[y].add(x)
            self.local[y] = self.cache.family_bic(y, frozenset(self.parents[y]))
            self.local[x] = self.cache.family_bic(x, frozenset(self.parents[x]))
        else:
            raise ValueError(kind)

    def edge_signature(self) -> tuple[tuple[int, int], ...]:
        return tuple(
            sorted((x, y) for y in range(self.p) for x in self.parents[y])
        )

    def to_dag(self, names: Sequence[str]) -> Dag:
        edges = [
            Edge.directed(names[x], names[y])
            for y in range(self.p)
            for x in sorted(self.parents[y])
        ]
        return Dag(tuple(names), edges)


# score-equivalent moves (e.g. the two orientations of a first edge) differ
# only by float summation noise; treat gains this close as exact ties so the
# first-in-order rule decides, not rounding error
GAIN_TIE_EPS = 1e-6


def hill_climb(data: CategoricalDataset, cfg: SearchConfig | None = None) -> Dag:
    """Greedy BIC ascent from the empty graph.

    Applies the best strictly improving add/delete/reverse each step; equal
    gains resolve to the first move in (kind, child, parent) order, so runs
    are reproducible on identical data.
    """
    cfg = cfg or SearchConfig()
    cache = ScoreCache(data)
    state = _SearchState(cache, len(data.names), cfg.max_parents)
    for _ in range(cfg.max_iterations):
        best = None
        best_gain = 0.0
        for kind, x, y, gain in state.moves():
            if gain > best_gain + GAIN_TIE_EPS:
                best = (kind, x, y)
                best_gain = gain
        if best is None:
            break
        state.apply(*best)
    return state.to_dag(data.names)


def tabu_search(data: CategoricalDataset, cfg: SearchConfig | None = None) -> Dag:
    """Hill climbing that escapes local optima by accepting the best
    non-tabu move even when it lowers the score; a recency list of visited
    edge-set signatures blocks immediate backtracking.  Returns the best
    graph seen anywhere along the walk.
    """
    cfg = cfg or SearchConfig()
    cache = ScoreCache(data)
    state = _SearchState(cache, len(data.names), cfg.max_parents)
    tabu: deque = deque(maxlen=cfg.tabu_list_length)
    tabu.append(state.edge_signature())
    best_signature = state.edge_signature()
    best_score = state.score
    stagnation = 0
    for _ in range(cfg.max_iterations):
        current = {(x, y) for y in range(state.p) for x in state.parents[y]}
        best_move = None
        best_gain = -math.inf
        for kind, x, y, gain in list(state.moves()):
            if gain <= best_gain + GAIN_TIE_EPS:
                continue
            if _signature_after(current, kind, x, y) in tabu:
                continue
            best_move = (kind, x, y)
            best_gain = gain
        if best_move is None:
            break
        state.apply(*best_move)
        sig = state.edge_signature()
        tabu.append(sig)
        if state.score > best_score + 1e-12:
            best_score = state.score
            best_signature = sig
            stagnation = 0
        else:
            stagnation += 1
            if stagnation >= cfg.stagnation_limit:
                break
    names = data.names
    return Dag(
        tuple(names),
        [Edge.directed(names[x], names[y]) for x, y in best_signature],
    )


def _signature_after(current: set, kind: str, x: int, y: int):
    pairs = set(current)
    if kind == "add":
        pairs.add((x, y))
    elif kind == "delete":
        pairs.remove((x, y))
    else:
        pairs.remove((x, y))
        pairs.add((y, x))
    return tuple(sorted(pairs))
