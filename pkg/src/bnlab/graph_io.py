"""Plain-text graph files.

Format: one ``nodes:`` header line with comma-separated labels, then one edge
per line using the tokens ``-->``, ``---``, ``<->``, ``o->``, ``o-o``.
Blank lines and ``#`` comments are ignored.  The writer is canonical: header
first, edges sorted by (lower node index, higher node index), directed edges
written source first, so re-reading and re-writing a file is a fixpoint.
"""

from __future__ import annotations

from pathlib import Path
from typing import Iterable

from .graphs import Edge, Mark, MixedGraph


class ParseError(ValueError):
    def __init__(self, message: str, line_no: int):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


_TOKEN_MARKS = {
    "-->": (Mark.TAIL, Mark.ARROW),
    "---": (Mark.TAIL, Mark.TAIL),
    "<->": (Mark.ARROW, Mark.ARROW),
    "o->": (Mark.CIRCLE, Mark.ARROW),
    "o-o": (Mark.CIRCLE, Mark.CIRCLE),
}


def parse_graph_text(text: str) -> MixedGraph:
    nodes: list[str] | None = None
    edges: list[Edge] = []
    seen_pairs: set[frozenset[str]] = set()
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("nodes:"):
            if nodes is not None:
                raise ParseError("duplicate nodes: header", line_no)
            labels = [tok.strip() for tok in line[len("nodes:"):].split(",")]
            labels = [tok for tok in labels if tok]
            if not labels:
                raise ParseError("empty node list", line_no)
            if len(set(labels)) != len(labels):
                raise ParseError("duplicate node label", line_no)
            nodes = labels
            continue
        if nodes is None:
            raise ParseError("edge line before nodes: header", line_no)
        parts = line.split()
        if len(parts) != 3:
            raise ParseError(f"expected 'A <token> B', got {line!r}", line_no)
        a, token, b = parts
        marks = _TOKEN_MARKS.get(token)
        if marks is None:
            raise ParseError(f"unknown edge token {token!r}", line_no)
        if a not in nodes:
            raise ParseError(f"unknown node {a!r}", line_no)
        if b not in nodes:
            raise ParseError(f"unknown node {b!r}", line_no)
        if a == b:
            raise ParseError(f"self-loop on {a!r}", line_no)
        pair = frozenset((a, b))
        if pair in seen_pairs:
            raise ParseError(f"duplicate edge between {a!r} and {b!r}", line_no)
        seen_pairs.add(pair)
        edges.append(Edge(a, b, marks[0], marks[1]))
    if nodes is None:
        raise ParseError("missing nodes: header", 1)
    return MixedGraph(nodes, edges)


def parse_graph_file(path: str | Path) -> MixedGraph:
    return parse_graph_text(Path(path).read_text())


def _edge_line(g: MixedGraph, e: Edge) -> str:
    if e.kind == "directed":
        return f"{e.source} --> {e.target}"
    ia, ib = g.index_of(e.a), g.index_of(e.b)
    a, b = (e.a, e.b) if ia < ib else (e.b, e.a)
    ma = e.mark_a if ia < ib else e.mark_b
    mb = e.mark_b if ia < ib else e.mark_a
    if (ma, mb) == (Mark.TAIL, Mark.TAIL):
        return f"{a} --- {b}"
    if (ma, mb) == (Mark.ARROW, Mark.ARROW):
        return f"{a} <-> {b}"
    if (ma, mb) == (Mark.CIRCLE, Mark.ARROW):
        return f"{a} o-> {b}"
    if (ma, mb) == (Mark.ARROW, Mark.CIRCLE):
        return f"{b} o-> {a}"
    if (ma, mb) == (Mark.CIRCLE, Mark.CIRCLE):
        return f"{a} o-o {b}"
    if (ma, mb) == (Mark.CIRCLE, Mark.TAIL):
        return f"{b} o-> {a}"  # unreachable for supported tokens
    raise ValueError(f"unsupported mark pair {ma} {mb}")


def graph_to_text(g: MixedGraph, annotations: dict[frozenset[str], str] | None = None) -> str:
    """Canonical text form.  ``annotations`` adds a trailing comment per pair."""
    lines = ["nodes: " + ",".join(g.nodes)]
    for e in g.edges():
        line = _edge_line(g, e)
        if annotations:
            note = annotations.get(frozenset((e.a, e.b)))
            if note:
                line = f"{line}  # {note}"
        lines.append(line)
    return "\n".join(lines) + "\n"


def write_graph_file(
    g: MixedGraph,
    path: str | Path,
    annotations: dict[frozenset[str], str] | None = None,
) -> None:
    Path(path).write_text(graph_to_text(g, annotations))


def write_graph_files(graphs: Iterable[tuple[MixedGraph, str | Path]]) -> None:
    for g, path in graphs:
        write_graph_file(g, path)
