import pytest
from hypothesis import given

from conftest import mixed_graphs
from bnlab.graph_io import (
    ParseError,
    graph_to_text,
    parse_graph_file,
    parse_graph_text,
    write_graph_file,
)
from bnlab.graphs import Edge, Mark, MixedGraph


SAMPLE = """\
# learnt structure
nodes: A,B,C,D

A --> B
B --- C   # unresolved orientation
C <-> D
A o-> D
"""


def test_parse_sample():
    g = parse_graph_text(SAMPLE)
    assert g.nodes == ("A", "B", "C", "D")
    assert g.directed_pairs() == [("A", "B")]
    assert g.undirected_pairs() == [("B", "C")]
    assert g.bidirected_pairs() == [("C", "D")]
    e = g.edge_between("A", "D")
    assert (e.mark_a, e.mark_b) == (Mark.CIRCLE, Mark.ARROW)


def test_parse_circle_circle():
    g = parse_graph_text("nodes: X,Y\nX o-o Y\n")
    e = g.edge_between("X", "Y")
    assert (e.mark_a, e.mark_b) == (Mark.CIRCLE, Mark.CIRCLE)


def test_nodes_only_graph():
    g = parse_graph_text("nodes: A,B\n")
    assert g.edge_count == 0


@pytest.mark.parametrize(
    "text,line",
    [
        ("A --> B\n", 1),                          # edge before header
        ("nodes: A,B\nnodes: A,B\n", 2),           # duplicate header
        ("nodes: A,A\n", 1),                       # duplicate label
        ("nodes:\n", 1),                           # empty node list
        ("nodes: A,B\nA -> B\n", 2),               # unknown token
        ("nodes: A,B\nA --> C\n", 2),              # unknown node
        ("nodes: A,B\nA --> A\n", 2),              # self loop
        ("nodes: A,B\nA --> B\nB --- A\n", 3),     # duplicate pair
        ("nodes: A,B\nA --> B extra\n", 2),        # malformed line
        ("", 1),                                   # missing header
    ],
)
def test_parse_errors_carry_line_numbers(text, line):
    with pytest.raises(ParseError) as exc:
        parse_graph_text(text)
    assert exc.value.line_no == line
    assert f"line {line}:" in str(exc.value)


def test_writer_is_canonical():
    g = MixedGraph(
        ("C", "A", "B"),
        [Edge.directed("B", "A"), Edge.undirected("C", "B")],
    )
    text = graph_to_text(g)
    # header preserves node order; edges sorted by index pair, source first
    assert text == "nodes: C,A,B\nC --- B\nB --> A\n"


def test_writer_annotations():
    g = MixedGraph(("A", "B"), [Edge.directed("A", "B")])
    text = graph_to_text(g, annotations={frozenset(("A", "B")): "12/20 runs"})
    assert "A --> B  # 12/20 runs" in text
    # annotated output still parses to the same graph
    assert parse_graph_text(text) == g


def test_roundtrip_file(tmp_path):
    g = parse_graph_text(SAMPLE)
    path = tmp_path / "g.graph"
    write_graph_file(g, path)
    assert parse_graph_file(path) == g
    # writing the re-read graph is byte-identical
    text1 = path.read_text()
    write_graph_file(parse_graph_file(path), path)
    assert path.read_text() == text1


@given(mixed_graphs())
def test_roundtrip_any_graph(g):
    assert parse_graph_text(graph_to_text(g)) == g


@given(mixed_graphs())
def test_writer_fixpoint(g):
    text = graph_to_text(g)
    assert graph_to_text(parse_graph_text(text)) == text
