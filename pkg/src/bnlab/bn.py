"""Discrete Bayesian networks: parameter fitting, exact inference,
do-operator interventions, an ordinal effect score, CPT sensitivity, and
per-node cross-validation.

A CPT is a (configurations x child states) array; parent configurations are
mixed-radix indices over the parent list in row-major order (last parent
varies fastest).  Inference is variable elimination with a greedy min-weight
ordering, exact for any graph this package produces.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .data import CategoricalDataset
from .graphs import Dag, Edge


class BnError(ValueError):
    pass


class UnseenConfigWithZeroSmoothing(BnError):
    """A parent configuration has no data rows and smoothing is disabled."""


class ZeroProbabilityEvidence(BnError):
    """The evidence assignment has probability zero under the network."""


@dataclass(frozen=True)
class Cpt:
    """Conditional distribution of ``child`` given ``parents`` (index order)."""

    child: str
    parents: tuple[str, ...]
    table: np.ndarray  # shape (prod parent arities, child arity)

    def __post_init__(self):
        t = self.table
        if t.ndim != 2:
            raise BnError(f"CPT for {self.child!r} must be 2-D")
        sums = t.sum(axis=1)
        if not np.allclose(sums, 1.0, atol=1e-9):
            raise BnError(f"CPT rows for {self.child!r} must sum to 1")
        if (t < -1e-12).any():
            raise BnError(f"negative probability in CPT for {self.child!r}")


class DiscreteBn:
    def __init__(
        self,
        dag: Dag,
        cpts: Mapping[str, Cpt],
        states: Mapping[str, tuple[str, ...]],
    ):
        for node in dag.nodes:
            if node not in cpts:
                raise BnError(f"missing CPT for {node!r}")
            if node not in states:
                raise BnError(f"missing state list for {node!r}")
            cpt = cpts[node]
            if tuple(dag.parents(node)) != cpt.parents:
                raise BnError(
                    f"CPT parents for {node!r} do not match the graph"
                )
            q = 1
            for p in cpt.parents:
                q *= len(states[p])
            if cpt.table.shape != (q, len(states[node])):
                raise BnError(f"CPT shape mismatch for {node!r}")
        self.graph = dag
        self.cpts = dict(cpts)
        self.states = {n: tuple(states[n]) for n in dag.nodes}

    def cardinality(self, node: str) -> int:
        return len(self.states[node])

    def state_index(self, node: str, state: str | int) -> int:
        if isinstance(state, int):
            if not 0 <= state < self.cardinality(node):
                raise BnError(f"state index {state} out of range for {node!r}")
            return state
        try:
            return self.states[node].index(state)
        except ValueError:
            raise BnError(f"{state!r} is not a state of {node!r}") from None

    def config_index(self, node: str, assignment: Mapping[str, int]) -> int:
        cpt = self.cpts[node]
        cfg = 0
        for p in cpt.parents:
            cfg = cfg * self.cardinality(p) + assignment[p]
        return cfg

    def cpt_probability(self, node: str, assignment: Mapping[str, int]) -> float:
        """P(node = assignment[node] | parents per assignment)."""
        return float(
            self.cpts[node].table[self.config_index(node, assignment), assignment[node]]
        )

    @staticmethod
    def uniform_states(arities: Mapping[str, int]) -> dict[str, tuple[str, ...]]:
        return {n: tuple(f"s{i}" for i in range(r)) for n, r in arities.items()}


def fit_cpts(
    d: Dag, data: CategoricalDataset, alpha_smooth: float = 1.0
) -> DiscreteBn:
    """Maximum-likelihood CPTs with additive smoothing.

    Each entry is (count + alpha) / (config total + alpha * child arity);
    with alpha = 0 an unseen parent configuration is an error rather than a
    silent NaN row.
    """
    if alpha_smooth < 0:
        raise BnError("alpha_smooth must be non-negative")
    data.require_complete()
    if set(d.nodes) != set(data.names):
        raise BnError("graph nodes and dataset columns differ")
    col = {name: i for i, name in enumerate(data.names)}
    codes = data.codes
    cpts = {}
    states = {name: data.states_of(name) for name in d.nodes}
    for node in d.nodes:
        parents = tuple(d.parents(node))
        r = len(states[node])
        if parents:
            dims = [len(states[p]) for p in parents]
            q = int(np.prod(dims, dtype=np.int64))
            cfg = np.ravel_multi_index(
                tuple(codes[:, col[p]] for p in parents), dims
            )
        else:
            q = 1
            cfg = np.zeros(data.row_count, dtype=np.int64)
        counts = np.bincount(cfg * r + codes[:, col[node]], minlength=q * r).reshape(
            q, r
        )
        totals = counts.sum(axis=1, keepdims=True)
        if alpha_smooth == 0 and (totals == 0).any():
            raise UnseenConfigWithZeroSmoothing(
                f"unseen parent configuration for {node!r} with zero smoothing"
            )
        table = (counts + alpha_smooth) / (totals + alpha_smooth * r)
        cpts[node] = Cpt(node, parents, table)
    return DiscreteBn(d, cpts, states)


# ---------------------------------------------------------------------------
# Variable elimination.
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class _Factor:
    vars: tuple[str, ...]
    table: np.ndarray


def _cpt_factor(bn: DiscreteBn, node: str) -> _Factor:
    cpt = bn.cpts[node]
    dims = [bn.cardinality(p) for p in cpt.parents] + [bn.cardinality(node)]
    return _Factor(cpt.parents + (node,), cpt.table.reshape(dims))


def _reduce(f: _Factor, var: str, state: int) -> _Factor:
    axis = f.vars.index(var)
    table = np.take(f.table, state, axis=axis)
    new_vars = f.vars[:axis] + f.vars[axis + 1 :]
    return _Factor(new_vars, table)


def _multiply(a: _Factor, b: _Factor, rank: Mapping[str, int]) -> _Factor:
    union = tuple(sorted(set(a.vars) | set(b.vars), key=rank.__getitem__))

    def aligned(f: _Factor) -> np.ndarray:
        present = [v for v in union if v in f.vars]
        arr = np.transpose(f.table, [f.vars.index(v) for v in present])
        shape = [arr.shape[present.index(v)] if v in f.vars else 1 for v in union]
        return arr.reshape(shape)

    return _Factor(union, aligned(a) * aligned(b))


def _sum_out(f: _Factor, var: str) -> _Factor:
    axis = f.vars.index(var)
    return _Factor(f.vars[:axis] + f.vars[axis + 1 :], f.table.sum(axis=axis))


def _elimination_order(
    factors: list[_Factor], to_eliminate: set[str], bn: DiscreteBn
) -> list[str]:
    """Greedy min-weight: repeatedly eliminate the variable whose product
    factor would be smallest; ties resolve by node index."""
    rank = {n: i for i, n in enumerate(bn.graph.nodes)}
    scopes = [set(f.vars) for f in factors]
    remaining = set(to_eliminate)
    order = []
    while remaining:
        best = None
        best_weight = None
        for v in sorted(remaining, key=rank.__getitem__):
            scope: set[str] = set()
            for s in scopes:
                if v in s:
                    scope |= s
            weight = 1
            for u in scope:
                weight *= bn.cardinality(u)
            if best_weight is None or weight < best_weight:
                best = v
                best_weight = weight
        order.append(best)
        merged: set[str] = set()
        kept = []
        for s in scopes:
            if best in s:
                merged |= s
            else:
                kept.append(s)
        merged.discard(best)
        if merged:
            kept.append(merged)
        scopes = kept
        remaining.discard(best)
    return order


def marginal(
    bn: DiscreteBn,
    target: str,
    evidence: Mapping[str, int | str] | None = None,
) -> np.ndarray:
    """Exact posterior P(target | evidence) as a probability vector."""
    evidence = evidence or {}
    if target in evidence:
        raise BnError("target cannot be part of the evidence")
    ev = {n: bn.state_index(n, s) for n, s in evidence.items()}
    rank = {n: i for i, n in enumerate(bn.graph.nodes)}
    factors = []
    for node in bn.graph.nodes:
        f = _cpt_factor(bn, node)
        for v in list(f.vars):
            if v in ev:
                f = _reduce(f, v, ev[v])
        factors.append(f)
    to_eliminate = set(bn.graph.nodes) - set(ev) - {target}
    for v in _elimination_order(factors, to_eliminate, bn):
        group = [f for f in factors if v in f.vars]
        factors = [f for f in factors if v not in f.vars]
        if not group:
            continue
        prod = group[0]
        for f in group[1:]:
            prod = _multiply(prod, f, rank)
        factors.append(_sum_out(prod, v))
    result = _Factor((), np.array(1.0))
    for f in factors:
        result = _multiply(result, f, rank)
    if result.vars != (target,):
        raise BnError("elimination did not leave the target variable")
    vec = np.asarray(result.table, dtype=float).reshape(-1)
    z = vec.sum()
    if z <= 0:
        raise ZeroProbabilityEvidence("evidence has probability zero")
    return vec / z


# ---------------------------------------------------------------------------
# Interventions and the ordinal effect score.
# ---------------------------------------------------------------------------

def do_intervene(bn: DiscreteBn, node: str, state: str | int) -> DiscreteBn:
    """Graph mutilation: cut the edges into ``node`` and pin it to ``state``."""
    s = bn.state_index(node, state)
    kept = [
        Edge.directed(src, dst)
        for src, dst in bn.graph.directed_pairs()
        if dst != node
    ]
    dag = Dag(bn.graph.nodes, kept)
    point = np.zeros((1, bn.cardinality(node)))
    point[0, s] = 1.0
    cpts = dict(bn.cpts)
    cpts[node] = Cpt(node, (), point)
    return DiscreteBn(dag, cpts, bn.states)


def default_effect_weights(n_states: int) -> tuple[float, ...]:
    """Ordinal weights: the published four-state values, else i/(s-1)."""
    if n_states < 2:
        raise BnError("effect weights need at least two states")
    if n_states == 4:
        return (0.0, 0.33, 0.66, 1.0)
    return tuple(i / (n_states - 1) for i in range(n_states))


def effect_score(
    dist_low: Sequence[float],
    dist_high: Sequence[float],
    w: Sequence[float] | None = None,
) -> float:
    """Absolute difference of the weighted means of two distributions."""
    low = np.asarray(dist_low, dtype=float)
    high = np.asarray(dist_high, dtype=float)
    if low.shape != high.shape:
        raise BnError("distributions differ in length")
    weights = np.asarray(
        default_effect_weights(low.size) if w is None else w, dtype=float
    )
    if weights.shape != low.shape:
        raise BnError("weights and distributions differ in length")
    return float(abs(low @ weights - high @ weights))


def intervention_effect(
    bn: DiscreteBn,
    do_node: str,
    target: str,
    w: Sequence[float] | None = None,
) -> float:
    """Effect of forcing ``do_node`` from its lowest to its highest state,
    read off ``target``'s interventional distributions."""
    if do_node == target:
        raise BnError("intervention node and target must differ")
    lo = marginal(do_intervene(bn, do_node, 0), target)
    hi = marginal(do_intervene(bn, do_node, bn.cardinality(do_node) - 1), target)
    return effect_score(lo, hi, w)


# ---------------------------------------------------------------------------
# Sensitivity analysis.
# ---------------------------------------------------------------------------

def sensitivity(
    bn: DiscreteBn, target: str, epsilon: float = 0.05
) -> dict[str, float]:
    """Largest L1 shift of the target marginal over single-row CPT nudges.

    Each row of a node's CPT is perturbed by moving ``epsilon`` mass (capped
    at the donor entry) from its most likely state to its least likely state;
    the node's score is the maximum shift across rows.  Nodes outside the
    target's ancestor set cannot move its marginal and score exactly 0.
    """
    if not 0 < epsilon < 0.5:
        raise BnError("epsilon must lie in (0, 0.5)")
    base = marginal(bn, target)
    ancestors = bn.graph.ancestors(target)
    out: dict[str, float] = {}
    for node in bn.graph.nodes:
        if node == target:
            continue
        if node not in ancestors:
            out[node] = 0.0
            continue
        cpt = bn.cpts[node]
        worst = 0.0
        for row in range(cpt.table.shape[0]):
            probs = cpt.table[row]
            if probs.size < 2:
                continue
            hi = int(probs.argmax())
            # least likely state other than the donor (ties go left)
            masked = probs.copy()
            masked[hi] = np.inf
            lo = int(masked.argmin())
            moved = min(epsilon, float(probs[hi]))
            perturbed = probs.copy()
            perturbed[hi] -= moved
            perturbed[lo] += moved
            table = cpt.table.copy()
            table[row] = perturbed / perturbed.sum()
            cpts = dict(bn.cpts)
            cpts[node] = Cpt(node, cpt.parents, table)
            shifted = marginal(DiscreteBn(bn.graph, cpts, bn.states), target)
            worst = max(worst, float(np.abs(shifted - base).sum()))
        out[node] = worst
    return out


# ---------------------------------------------------------------------------
# Cross-validation.
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CvResult:
    per_node: dict[str, float]
    mean_accuracy: float
    fold_sizes: tuple[int, ...]


def _predict_node(bn: DiscreteBn, codes: np.ndarray, col: Mapping[str, int], node: str) -> np.ndarray:
    """Argmax of P(node | all other variables) for every row, vectorized via
    the Markov-blanket factorization."""
    n = codes.shape[0]
    r = bn.cardinality(node)
    cpt = bn.cpts[node]
    if cpt.parents:
        dims = [bn.cardinality(p) for p in cpt.parents]
        cfg = np.ravel_multi_index(tuple(codes[:, col[p]] for p in cpt.parents), dims)
    else:
        cfg = np.zeros(n, dtype=np.int64)
    with np.errstate(divide="ignore"):
        scores = np.log(cpt.table[cfg, :])  # (n, r)
        for child in bn.graph.children(node):
            ccpt = bn.cpts[child]
            dims = [bn.cardinality(p) for p in ccpt.parents]
            pos = ccpt.parents.index(node)
            child_vals = codes[:, col[child]]
            for s in range(r):
                parent_codes = [
                    np.full(n, s, dtype=np.int64) if p == node else codes[:, col[p]]
                    for p in ccpt.parents
                ]
                ccfg = np.ravel_multi_index(tuple(parent_codes), dims)
                scores[:, s] += np.log(ccpt.table[ccfg, child_vals])
    return scores.argmax(axis=1)


def cross_validate(
    d: Dag,
    data: CategoricalDataset,
    k: int = 10,
    seed: int = 0,
    alpha_smooth: float = 1.0,
) -> CvResult:
    """Plain k-fold CV; each node is predicted from all other columns.

    Folds split a seeded permutation of the row indices; per-node accuracy
    pools the correct predictions across folds, and the headline number is
    the unweighted mean over nodes.
    """
    if k < 2:
        raise BnError("k must be at least 2")
    data.require_complete()
    if data.row_count < k:
        raise BnError("fewer rows than folds")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(data.row_count)
    folds = np.array_split(perm, k)
    col = {name: i for i, name in enumerate(data.names)}
    correct = {n: 0 for n in data.names}
    for fold in folds:
        mask = np.ones(data.row_count, dtype=bool)
        mask[fold] = False
        train = data.take_rows(np.flatnonzero(mask))
        test_codes = data.codes[fold]
        bn = fit_cpts(d, train, alpha_smooth)
        for node in data.names:
            pred = _predict_node(bn, test_codes, col, node)
            correct[node] += int((pred == test_codes[:, col[node]]).sum())
    per_node = {n: correct[n] / data.row_count for n in data.names}
    return CvResult(
        per_node=per_node,
        mean_accuracy=float(np.mean(list(per_node.values()))),
        fold_sizes=tuple(len(f) for f in folds),
    )
