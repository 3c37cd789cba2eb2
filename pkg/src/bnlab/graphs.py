"""Mixed causal graphs (DAG / PDAG / CPDAG / bidirected) and structural operations.

A graph stores at most one edge per unordered node pair; each edge carries one
endpoint mark per side (tail, arrow, circle), so directed, undirected,
bidirected and circle-marked edges live in a single representation.  Graphs
are immutable after construction and all operations are pure functions.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from enum import Enum
from itertools import combinations
from typing import Iterable, Iterator, Mapping, Sequence


class Mark(Enum):
    TAIL = "tail"
    ARROW = "arrow"
    CIRCLE = "circle"


class GraphError(ValueError):
    pass


class CycleError(GraphError):
    """A directed cycle where acyclicity is required."""


class NotExtendable(GraphError):
    """The PDAG admits no consistent DAG extension."""


class NodeUniverseMismatch(GraphError):
    """Two graphs that must share a node universe do not."""


@dataclass(frozen=True)
class Edge:
    """One edge between labels ``a`` and ``b`` with per-endpoint marks.

    Conventions: directed a->b is (TAIL at a, ARROW at b); undirected is
    (TAIL, TAIL); bidirected is (ARROW, ARROW); circle marks give o-> / o-o.
    """

    a: str
    b: str
    mark_a: Mark
    mark_b: Mark

    @staticmethod
    def directed(src: str, dst: str) -> "Edge":
        return Edge(src, dst, Mark.TAIL, Mark.ARROW)

    @staticmethod
    def undirected(a: str, b: str) -> "Edge":
        return Edge(a, b, Mark.TAIL, Mark.TAIL)

    @staticmethod
    def bidirected(a: str, b: str) -> "Edge":
        return Edge(a, b, Mark.ARROW, Mark.ARROW)

    @property
    def kind(self) -> str:
        marks = (self.mark_a, self.mark_b)
        if marks == (Mark.TAIL, Mark.ARROW) or marks == (Mark.ARROW, Mark.TAIL):
            return "directed"
        if marks == (Mark.TAIL, Mark.TAIL):
            return "undirected"
        if marks == (Mark.ARROW, Mark.ARROW):
            return "bidirected"
        return "partial"

    @property
    def source(self) -> str:
        if self.kind != "directed":
            raise GraphError(f"edge {self} is not directed")
        return self.a if self.mark_b is Mark.ARROW else self.b

    @property
    def target(self) -> str:
        if self.kind != "directed":
            raise GraphError(f"edge {self} is not directed")
        return self.b if self.mark_b is Mark.ARROW else self.a

    def flipped(self) -> "Edge":
        return Edge(self.b, self.a, self.mark_b, self.mark_a)


class MixedGraph:
    """Immutable graph over labelled nodes with marked edges.

    Node order is significant (it fixes indices used for deterministic
    tie-breaking and file output); structural equality ignores it.
    """

    def __init__(self, nodes: Sequence[str], edges: Iterable[Edge] = ()):
        nodes = tuple(nodes)
        if len(set(nodes)) != len(nodes):
            raise GraphError("duplicate node labels")
        self._nodes = nodes
        self._index = {label: i for i, label in enumerate(nodes)}
        # keyed by (i, j) with i < j; value = (mark at i, mark at j)
        self._edges: dict[tuple[int, int], tuple[Mark, Mark]] = {}
        for e in edges:
            ia = self._index.get(e.a)
            ib = self._index.get(e.b)
            if ia is None or ib is None:
                raise GraphError(f"edge endpoint not in node set: {e}")
            if ia == ib:
                raise GraphError(f"self-loop on {e.a}")
            key = (ia, ib) if ia < ib else (ib, ia)
            marks = (e.mark_a, e.mark_b) if ia < ib else (e.mark_b, e.mark_a)
            if key in self._edges:
                raise GraphError(f"multiple edges between {e.a} and {e.b}")
            self._edges[key] = marks

    @property
    def nodes(self) -> tuple[str, ...]:
        return self._nodes

    @property
    def node_count(self) -> int:
        return len(self._nodes)

    @property
    def edge_count(self) -> int:
        return len(self._edges)

    def index_of(self, label: str) -> int:
        return self._index[label]

    def edges(self) -> list[Edge]:
        """All edges, canonically ordered by (lower index, higher index)."""
        out = []
        for (i, j) in sorted(self._edges):
            mi, mj = self._edges[(i, j)]
            out.append(Edge(self._nodes[i], self._nodes[j], mi, mj))
        return out

    def edge_between(self, a: str, b: str) -> Edge | None:
        """The edge between a and b, reported from a's side (marks swap with
        argument order)."""
        ia, ib = self._index[a], self._index[b]
        key = (ia, ib) if ia < ib else (ib, ia)
        marks = self._edges.get(key)
        if marks is None:
            return None
        if ia < ib:
            return Edge(a, b, marks[0], marks[1])
        return Edge(a, b, marks[1], marks[0])

    def has_edge(self, a: str, b: str) -> bool:
        ia, ib = self._index[a], self._index[b]
        return ((ia, ib) if ia < ib else (ib, ia)) in self._edges

    def directed_pairs(self) -> list[tuple[str, str]]:
        """(source, target) for every directed edge, canonical order."""
        out = []
        for (i, j) in sorted(self._edges):
            mi, mj = self._edges[(i, j)]
            if (mi, mj) == (Mark.TAIL, Mark.ARROW):
                out.append((self._nodes[i], self._nodes[j]))
            elif (mi, mj) == (Mark.ARROW, Mark.TAIL):
                out.append((self._nodes[j], self._nodes[i]))
        return out

    def undirected_pairs(self) -> list[tuple[str, str]]:
        return self._pairs_of_kind(Mark.TAIL, Mark.TAIL)

    def bidirected_pairs(self) -> list[tuple[str, str]]:
        return self._pairs_of_kind(Mark.ARROW, Mark.ARROW)

    def _pairs_of_kind(self, ma: Mark, mb: Mark) -> list[tuple[str, str]]:
        return [
            (self._nodes[i], self._nodes[j])
            for (i, j) in sorted(self._edges)
            if self._edges[(i, j)] == (ma, mb)
        ]

    def parents(self, label: str) -> list[str]:
        """Sources of directed edges into ``label``, in index order."""
        k = self._index[label]
        out = []
        for (i, j), (mi, mj) in self._edges.items():
            if j == k and (mi, mj) == (Mark.TAIL, Mark.ARROW):
                out.append(i)
            elif i == k and (mi, mj) == (Mark.ARROW, Mark.TAIL):
                out.append(j)
        return [self._nodes[i] for i in sorted(out)]

    def children(self, label: str) -> list[str]:
        k = self._index[label]
        out = []
        for (i, j), (mi, mj) in self._edges.items():
            if i == k and (mi, mj) == (Mark.TAIL, Mark.ARROW):
                out.append(j)
            elif j == k and (mi, mj) == (Mark.ARROW, Mark.TAIL):
                out.append(i)
        return [self._nodes[i] for i in sorted(out)]

    def neighbors(self, label: str) -> list[str]:
        """All adjacent nodes regardless of marks, in index order."""
        k = self._index[label]
        out = [j if i == k else i for (i, j) in self._edges if k in (i, j)]
        return [self._nodes[i] for i in sorted(out)]

    def normalize_circles(self) -> "MixedGraph":
        """Map circle marks onto tails: o-> becomes directed, o-o undirected."""
        edges = []
        for e in self.edges():
            ma = Mark.TAIL if e.mark_a is Mark.CIRCLE else e.mark_a
            mb = Mark.TAIL if e.mark_b is Mark.CIRCLE else e.mark_b
            edges.append(Edge(e.a, e.b, ma, mb))
        return MixedGraph(self._nodes, edges)

    def _pair_key(self, e: Edge) -> tuple:
        if e.a <= e.b:
            return (e.a, e.b, e.mark_a, e.mark_b)
        return (e.b, e.a, e.mark_b, e.mark_a)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, MixedGraph):
            return NotImplemented
        if set(self._nodes) != set(other._nodes):
            return False
        mine = {self._pair_key(e) for e in self.edges()}
        theirs = {other._pair_key(e) for e in other.edges()}
        return mine == theirs

    def __hash__(self) -> int:
        return hash(
            (frozenset(self._nodes), frozenset(self._pair_key(e) for e in self.edges()))
        )

    def __repr__(self) -> str:
        return f"MixedGraph({len(self._nodes)} nodes, {len(self._edges)} edges)"


class Dag(MixedGraph):
    """A MixedGraph restricted to directed edges and checked acyclic."""

    def __init__(self, nodes: Sequence[str], edges: Iterable[Edge] = ()):
        super().__init__(nodes, edges)
        for e in self.edges():
            if e.kind != "directed":
                raise GraphError(f"non-directed edge in DAG: {e.a} ~ {e.b}")
        if not is_acyclic(self):
            raise CycleError("directed cycle")

    @staticmethod
    def from_pairs(nodes: Sequence[str], pairs: Iterable[tuple[str, str]]) -> "Dag":
        return Dag(nodes, [Edge.directed(a, b) for a, b in pairs])

    def topological_order(self) -> list[str]:
        order: list[str] = []
        indeg = {n: 0 for n in self.nodes}
        children: dict[str, list[str]] = {n: [] for n in self.nodes}
        for src, dst in self.directed_pairs():
            indeg[dst] += 1
            children[src].append(dst)
        ready = deque(n for n in self.nodes if indeg[n] == 0)
        while ready:
            n = ready.popleft()
            order.append(n)
            for c in children[n]:
                indeg[c] -= 1
                if indeg[c] == 0:
                    ready.append(c)
        return order

    def ancestors(self, label: str) -> set[str]:
        """Proper ancestors of ``label``."""
        parents: dict[str, list[str]] = {n: [] for n in self.nodes}
        for src, dst in self.directed_pairs():
            parents[dst].append(src)
        seen: set[str] = set()
        stack = list(parents[label])
        while stack:
            p = stack.pop()
            if p not in seen:
                seen.add(p)
                stack.extend(parents[p])
        return seen

    def descendants(self, label: str) -> set[str]:
        children: dict[str, list[str]] = {n: [] for n in self.nodes}
        for src, dst in self.directed_pairs():
            children[src].append(dst)
        seen: set[str] = set()
        stack = list(children[label])
        while stack:
            c = stack.pop()
            if c not in seen:
                seen.add(c)
                stack.extend(children[c])
        return seen


def is_acyclic(g: MixedGraph) -> bool:
    """True iff the directed edges of g contain no directed cycle.

    Undirected, bidirected and circle-marked edges are ignored.
    """
    indeg = {n: 0 for n in g.nodes}
    children: dict[str, list[str]] = {n: [] for n in g.nodes}
    for src, dst in g.directed_pairs():
        indeg[dst] += 1
        children[src].append(dst)
    ready = deque(n for n in g.nodes if indeg[n] == 0)
    seen = 0
    while ready:
        n = ready.popleft()
        seen += 1
        for c in children[n]:
            indeg[c] -= 1
            if indeg[c] == 0:
                ready.append(c)
    return seen == len(g.nodes)


def skeleton(g: MixedGraph) -> MixedGraph:
    """Same adjacencies with every mark replaced by a tail."""
    return MixedGraph(
        g.nodes, [Edge.undirected(e.a, e.b) for e in g.edges()]
    )


def v_structures(g: MixedGraph) -> frozenset[tuple[str, str, str]]:
    """All collider triples (x, z, y): x->z<-y with x, y non-adjacent.

    Only directed edges produce arrowheads here; triples are reported with
    x, y in label order so sets compare across graphs with different node
    orders.
    """
    triples = set()
    for z in g.nodes:
        pa = g.parents(z)
        for x, y in combinations(pa, 2):
            if not g.has_edge(x, y):
                lo, hi = (x, y) if x <= y else (y, x)
                triples.add((lo, z, hi))
    return frozenset(triples)


def disjoint_subgraph_count(g: MixedGraph, include_isolated: bool = True) -> int:
    """Number of weakly connected components, treating all edges as undirected.

    Isolated nodes count as components unless ``include_isolated`` is False.
    """
    parent = {n: n for n in g.nodes}

    def find(x: str) -> str:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for e in g.edges():
        ra, rb = find(e.a), find(e.b)
        if ra != rb:
            parent[ra] = rb
    touched = {e.a for e in g.edges()} | {e.b for e in g.edges()}
    roots = set()
    for n in g.nodes:
        if include_isolated or n in touched:
            roots.add(find(n))
    return len(roots)


@dataclass(frozen=True)
class DegreeStats:
    max_in_degree: int
    max_out_degree: int
    max_degree: int
    edge_count: int


def degree_stats(g: MixedGraph) -> DegreeStats:
    """In/out degrees count directed edges only; max_degree counts all edges."""
    indeg = {n: 0 for n in g.nodes}
    outdeg = {n: 0 for n in g.nodes}
    total = {n: 0 for n in g.nodes}
    for e in g.edges():
        total[e.a] += 1
        total[e.b] += 1
    for src, dst in g.directed_pairs():
        outdeg[src] += 1
        indeg[dst] += 1
    zero = ([0], [0], [0])
    return DegreeStats(
        max(indeg.values() or zero[0], default=0),
        max(outdeg.values() or zero[1], default=0),
        max(total.values() or zero[2], default=0),
        g.edge_count,
    )


# ---------------------------------------------------------------------------
# Equivalence-class machinery: DAG -> CPDAG and PDAG -> DAG extension.
# ---------------------------------------------------------------------------

_UND = 0
_AB = 1  # directed low-index -> high-index
_BA = 2  # directed high-index -> low-index


def _orientation_closure(
    n: int,
    adj: set[tuple[int, int]],
    state: dict[tuple[int, int], int],
) -> None:
    """Propagate compelled orientations (the three standard rules) in place.

    ``state`` maps each adjacent pair (i, j), i < j, to _UND/_AB/_BA.
    """

    def directed(i: int, j: int) -> bool:
        key = (i, j) if i < j else (j, i)
        want = _AB if i < j else _BA
        return state.get(key) == want

    def undirected(i: int, j: int) -> bool:
        key = (i, j) if i < j else (j, i)
        return state.get(key) == _UND

    def orient(i: int, j: int) -> bool:
        key = (i, j) if i < j else (j, i)
        want = _AB if i < j else _BA
        if state[key] == want:
            return False
        state[key] = want
        return True

    def adjacent(i: int, j: int) -> bool:
        return ((i, j) if i < j else (j, i)) in adj

    changed = True
    while changed:
        changed = False
        for (i, j) in sorted(adj):
            for a, b in ((i, j), (j, i)):
                if not undirected(a, b):
                    continue
                # rule 1: c -> a, a - b, c and b non-adjacent  =>  a -> b
                if any(
                    directed(c, a) and not adjacent(c, b)
                    for c in range(n)
                    if c not in (a, b)
                ):
                    changed |= orient(a, b)
                    continue
                # rule 2: a -> c -> b with a - b  =>  a -> b
                if any(
                    directed(a, c) and directed(c, b)
                    for c in range(n)
                    if c not in (a, b)
                ):
                    changed |= orient(a, b)
                    continue
                # rule 3: a - c -> b, a - d -> b, c and d non-adjacent  =>  a -> b
                spokes = [
                    c
                    for c in range(n)
                    if c not in (a, b) and undirected(a, c) and directed(c, b)
                ]
                if any(
                    not adjacent(c, d) for c, d in combinations(spokes, 2)
                ):
                    changed |= orient(a, b)


def dag_to_cpdag(d: Dag) -> MixedGraph:
    """The completed PDAG of d's Markov equivalence class.

    Edges in v-structures keep their orientation, the orientation closure
    rules compel the rest, and every remaining edge becomes undirected.
    """
    n = d.node_count
    idx = {lab: i for i, lab in enumerate(d.nodes)}
    adj = set()
    state: dict[tuple[int, int], int] = {}
    for src, dst in d.directed_pairs():
        i, j = idx[src], idx[dst]
        key = (i, j) if i < j else (j, i)
        adj.add(key)
        state[key] = _UND
    for (x, z, y) in v_structures(d):
        for src in (x, y):
            i, j = idx[src], idx[z]
            key = (i, j) if i < j else (j, i)
            state[key] = _AB if i < j else _BA
    _orientation_closure(n, adj, state)
    edges = []
    for (i, j), s in state.items():
        a, b = d.nodes[i], d.nodes[j]
        if s == _UND:
            edges.append(Edge.undirected(a, b))
        elif s == _AB:
            edges.append(Edge.directed(a, b))
        else:
            edges.append(Edge.directed(b, a))
    return MixedGraph(d.nodes, edges)


def pdag_to_dag_extension(p: MixedGraph) -> Dag:
    """A consistent DAG extension of a PDAG (same skeleton and v-structures).

    Repeatedly removes a node that can act as a sink: no outgoing directed
    edge, and every undirected neighbour adjacent to all of the node's other
    neighbours.  Candidates are tried from the highest node index down, which
    orients a lone undirected edge from the lower-indexed node to the higher.
    Raises NotExtendable when no consistent extension exists.
    """
    for e in p.edges():
        if e.kind not in ("directed", "undirected"):
            raise GraphError(f"extension requires directed/undirected edges only: {e}")
    n = p.node_count
    idx = {lab: i for i, lab in enumerate(p.nodes)}
    und: dict[int, set[int]] = {i: set() for i in range(n)}
    into: dict[int, set[int]] = {i: set() for i in range(n)}  # directed parents
    out: dict[int, set[int]] = {i: set() for i in range(n)}
    for e in p.edges():
        if e.kind == "undirected":
            i, j = idx[e.a], idx[e.b]
            und[i].add(j)
            und[j].add(i)
        else:
            s, t = idx[e.source], idx[e.target]
            out[s].add(t)
            into[t].add(s)
    oriented: list[tuple[int, int]] = [(s, t) for t in into for s in into[t]]
    alive = set(range(n))

    def adjacent(i: int, j: int) -> bool:
        return j in und[i] or j in into[i] or j in out[i]

    while alive:
        sink = None
        for x in sorted(alive, reverse=True):
            if out[x] & alive:
                continue
            neigh = (und[x] | into[x]) & alive
            ok = all(
                adjacent(y, z)
                for y in (und[x] & alive)
                for z in neigh
                if z != y
            )
            if ok:
                sink = x
                break
        if sink is None:
            raise NotExtendable("no consistent DAG extension exists")
        for y in und[sink] & alive:
            oriented.append((y, sink))
        alive.discard(sink)
    return Dag(
        p.nodes,
        [Edge.directed(p.nodes[s], p.nodes[t]) for s, t in oriented],
    )


def require_same_universe(a: MixedGraph, b: MixedGraph) -> None:
    if set(a.nodes) != set(b.nodes):
        raise NodeUniverseMismatch(
            f"node sets differ: {sorted(set(a.nodes) ^ set(b.nodes))}"
        )
