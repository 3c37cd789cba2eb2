"""Graph comparison metrics: fractional SHD, precision/recall/F1, BSF.

Both graphs are compared pair-by-pair over unordered node pairs after mapping
circle marks onto directed/undirected.  A pair scores 0 when both graphs agree
exactly, 1 when exactly one graph has an edge there, and 0.5 for any other
disagreement (reversal, wrong edge type).  SHD is the sum of those penalties,
and the confusion counts split a partially matched true edge into fractional
TP/FN so that SHD = FN + FP holds exactly.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

from .graphs import MixedGraph, NodeUniverseMismatch, require_same_universe

EDGE_KINDS = ("none", "forward", "backward", "undirected", "bidirected")


class DegenerateTrueGraph(ValueError):
    """BSF needs at least one true edge and one true independency."""


def _pair_kind(g: MixedGraph, a: str, b: str) -> str:
    e = g.edge_between(a, b)
    if e is None:
        return "none"
    if e.kind == "directed":
        return "forward" if e.source == a else "backward"
    if e.kind == "undirected":
        return "undirected"
    if e.kind == "bidirected":
        return "bidirected"
    raise ValueError(f"circle marks must be normalized before comparison: {e}")


def pairwise_penalty(true_kind: str, learnt_kind: str) -> float:
    """Penalty for one node pair: 0 exact match, 1 missing/extra edge,
    0.5 any partial mismatch between two present edges."""
    for k in (true_kind, learnt_kind):
        if k not in EDGE_KINDS:
            raise ValueError(f"unknown edge kind {k!r}")
    if true_kind == learnt_kind:
        return 0.0
    if true_kind == "none" or learnt_kind == "none":
        return 1.0
    return 0.5


@dataclass(frozen=True)
class Confusion:
    tp: float
    tn: float
    fp: float
    fn: float


@dataclass(frozen=True)
class MetricsReport:
    shd: float
    precision: float
    recall: float
    f1: float
    bsf: float
    true_edges: int
    learnt_edges: int

    def as_dict(self) -> dict:
        return {
            "shd": self.shd,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "bsf": self.bsf,
            "true_edges": self.true_edges,
            "learnt_edges": self.learnt_edges,
        }


def _prepared(true_g: MixedGraph, learnt_g: MixedGraph):
    require_same_universe(true_g, learnt_g)
    return true_g.normalize_circles(), learnt_g.normalize_circles()


def shd(true_g: MixedGraph, learnt_g: MixedGraph) -> float:
    t, l = _prepared(true_g, learnt_g)
    total = 0.0
    for a, b in combinations(sorted(t.nodes), 2):
        total += pairwise_penalty(_pair_kind(t, a, b), _pair_kind(l, a, b))
    return total


def confusion(true_g: MixedGraph, learnt_g: MixedGraph) -> Confusion:
    """Fractional confusion counts.

    A true-edge pair matched by some learnt edge contributes 1-p to TP and p
    to FN, where p is the pair's penalty; a missed true edge is a whole FN, an
    extra learnt edge a whole FP.  tp+fn equals the true edge count and tn+fp
    the true independency count.
    """
    t, l = _prepared(true_g, learnt_g)
    tp = tn = fp = fn = 0.0
    for a, b in combinations(sorted(t.nodes), 2):
        tk, lk = _pair_kind(t, a, b), _pair_kind(l, a, b)
        if tk != "none" and lk != "none":
            p = pairwise_penalty(tk, lk)
            tp += 1.0 - p
            fn += p
        elif tk != "none":
            fn += 1.0
        elif lk != "none":
            fp += 1.0
        else:
            tn += 1.0
    return Confusion(tp=tp, tn=tn, fp=fp, fn=fn)


def precision(c: Confusion) -> float:
    denom = c.tp + c.fp
    return c.tp / denom if denom > 0 else 0.0


def recall(c: Confusion) -> float:
    denom = c.tp + c.fn
    return c.tp / denom if denom > 0 else 0.0


def f1(c: Confusion) -> float:
    p, r = precision(c), recall(c)
    return 2 * p * r / (p + r) if p + r > 0 else 0.0


def bsf(c: Confusion, a: float, i: float) -> float:
    """Balanced scoring: 0.5*(TP/a + TN/i - FP/i - FN/a), in [-1, 1].

    ``a`` is the number of true edges, ``i`` the number of true
    independencies (non-adjacent pairs).
    """
    if a <= 0 or i <= 0:
        raise DegenerateTrueGraph(
            "balanced score undefined without both edges and independencies"
        )
    return 0.5 * (c.tp / a + c.tn / i - c.fp / i - c.fn / a)


def compare_graphs(true_g: MixedGraph, learnt_g: MixedGraph) -> MetricsReport:
    """All metrics for one (reference, learnt) pair."""
    t, l = _prepared(true_g, learnt_g)
    c = confusion(t, l)
    a = t.edge_count
    n = t.node_count
    i = n * (n - 1) // 2 - a
    return MetricsReport(
        shd=shd(t, l),
        precision=precision(c),
        recall=recall(c),
        f1=f1(c),
        bsf=bsf(c, a, i) if a > 0 and i > 0 else float("nan"),
        true_edges=a,
        learnt_edges=l.edge_count,
    )
