import itertools
import math

import numpy as np
import pytest

from bnlab.constraint import InsufficientData, g2_test, pc_stable
from bnlab.data import CategoricalDataset, Column
from bnlab.graphs import Edge, MixedGraph, skeleton, v_structures
from bnlab.synthetic import identifiable_random_bn, sample


def dataset_from_codes(codes, arities, names=None):
    codes = np.asarray(codes)
    names = names or [f"V{i}" for i in range(codes.shape[1])]
    return CategoricalDataset(
        [
            Column(
                names[j],
                "categorical",
                tuple(int(v) for v in codes[:, j]),
                tuple(f"s{i}" for i in range(arities[j])),
            )
            for j in range(codes.shape[1])
        ]
    )


def table_dataset(xy_counts, names=("X", "Y")):
    """Dataset realizing a 2-d contingency table."""
    rows = []
    for x, row in enumerate(xy_counts):
        for y, c in enumerate(row):
            rows.extend([[x, y]] * c)
    return dataset_from_codes(rows, [len(xy_counts), len(xy_counts[0])], names)


class TestG2:
    def test_exact_independence(self):
        d = table_dataset([[25, 25], [25, 25]])
        r = g2_test("X", "Y", [], d)
        assert r.statistic == pytest.approx(0.0, abs=1e-12)
        assert r.dof == 1
        assert r.p_value == pytest.approx(1.0)

    def test_perfect_association(self):
        d = table_dataset([[50, 0], [0, 50]])
        r = g2_test("X", "Y", [], d)
        assert r.statistic == pytest.approx(200 * math.log(2), abs=1e-9)
        assert r.dof == 1
        assert r.p_value < 1e-20

    def test_conditional_independence_given_common_cause(self, rng):
        # X = Z and Y = Z: marginally dependent, independent given Z
        z = rng.integers(0, 2, size=400)
        d = dataset_from_codes(
            np.column_stack([z, z, z]), [2, 2, 2], names=("X", "Y", "Z")
        )
        marginal = g2_test("X", "Y", [], d)
        conditional = g2_test("X", "Y", ["Z"], d)
        assert marginal.p_value < 1e-10
        assert conditional.statistic == pytest.approx(0.0, abs=1e-9)
        assert conditional.p_value == pytest.approx(1.0)

    def test_dof_drops_for_empty_rows(self):
        # X never takes state 2: one all-zero row in the only stratum
        d = table_dataset([[30, 30], [30, 30], [0, 0]])
        r = g2_test("X", "Y", [], d)
        assert r.dof == max((3 - 1) * (2 - 1) - 1, 1)

    def test_dof_floor_is_one(self):
        d = table_dataset([[40, 0], [0, 0]])
        r = g2_test("X", "Y", [], d)
        assert r.dof == 1

    def test_stratified_dof_adds_up(self, rng):
        z = rng.integers(0, 3, size=600)
        x = rng.integers(0, 2, size=600)
        y = rng.integers(0, 2, size=600)
        d = dataset_from_codes(
            np.column_stack([x, y, z]), [2, 2, 3], names=("X", "Y", "Z")
        )
        r = g2_test("X", "Y", ["Z"], d)
        assert r.dof == 3  # one per stratum, none degenerate at n=600

    def test_empty_dataset_insufficient(self):
        d = dataset_from_codes(np.zeros((0, 2), dtype=int), [2, 2])
        with pytest.raises(InsufficientData):
            g2_test("V0", "V1", [], d)

    def test_variable_overlap_rejected(self):
        d = table_dataset([[10, 10], [10, 10]])
        with pytest.raises(ValueError):
            g2_test("X", "X", [], d)
        with pytest.raises(ValueError):
            g2_test("X", "Y", ["Y"], d)

    def test_p_monotone_in_statistic_at_fixed_dof(self):
        from scipy.stats import chi2

        stats = [0.0, 1.0, 5.0, 20.0]
        ps = [float(chi2.sf(s, 3)) for s in stats]
        assert ps == sorted(ps, reverse=True)


class TestPcStable:
    def test_single_strong_pair(self, rng):
        bn = identifiable_random_bn(
            ("A", "B"), {"A": 3, "B": 3}, rng, edge_prob=1.0, min_edges=1
        )
        data = sample(bn, 2000, rng)
        extra = dataset_from_codes(
            rng.integers(0, 3, size=(2000, 1)), [3], names=("C",)
        )
        joined = CategoricalDataset(list(data.columns) + list(extra.columns))
        g, sepsets = pc_stable(joined)
        assert skeleton(g) == MixedGraph(
            ("A", "B", "C"), [Edge.undirected("A", "B")]
        )

    def test_collider_oriented(self, rng):
        # additive collider: C = A + B keeps each parent marginally coupled
        # to C while A and B stay independent until conditioned on C
        n = 4000
        a = rng.integers(0, 2, n)
        b = rng.integers(0, 2, n)
        noise = rng.random(n) < 0.05
        c = np.where(noise, rng.integers(0, 3, n), a + b)
        data = dataset_from_codes(
            np.column_stack([a, b, c]), [2, 2, 3], names=("A", "B", "C")
        )
        g, _ = pc_stable(data)
        assert set(g.directed_pairs()) == {("A", "C"), ("B", "C")}
        assert v_structures(g) == {("A", "C", "B")}

    def test_independent_columns_empty_graph(self, rng):
        data = dataset_from_codes(
            rng.integers(0, 3, size=(2000, 4)), [3, 3, 3, 3]
        )
        # keep the false-keep rate (= alpha per test) negligible
        g, sepsets = pc_stable(data, alpha=1e-4)
        assert g.edge_count == 0
        assert len(sepsets) == 6

    def test_sepsets_only_for_removed_edges(self, rng):
        bn = identifiable_random_bn(
            tuple("ABCD"), {n: 2 for n in "ABCD"}, rng, min_edges=2
        )
        data = sample(bn, 3000, rng)
        g, sepsets = pc_stable(data)
        for a, b in itertools.combinations(sorted(g.nodes), 2):
            if g.has_edge(a, b):
                assert frozenset((a, b)) not in sepsets
            else:
                assert frozenset((a, b)) in sepsets

    def test_skeleton_invariant_to_column_permutation(self, rng):
        bn = identifiable_random_bn(
            tuple("ABCDE"), {n: 2 for n in "ABCDE"}, rng, edge_prob=0.5, min_edges=3
        )
        data = sample(bn, 1500, rng)
        base_graph, base_sepsets = pc_stable(data)
        for _ in range(10):
            perm = list(rng.permutation(len(data.names)))
            shuffled = data.select([data.names[i] for i in perm])
            g, sepsets = pc_stable(shuffled)
            assert skeleton(g) == skeleton(base_graph)
            assert g == base_graph  # orientations too, given label-ordered tests
            assert sepsets == base_sepsets

    def test_alpha_bounds_validated(self, rng):
        data = dataset_from_codes(rng.integers(0, 2, size=(50, 2)), [2, 2])
        with pytest.raises(ValueError):
            pc_stable(data, alpha=0.0)
        with pytest.raises(ValueError):
            pc_stable(data, alpha=1.0)

    def test_smaller_alpha_prunes_independent_data_harder(self, rng):
        # on independent columns the removal rule p > alpha fires more often
        # as alpha shrinks
        data = dataset_from_codes(
            rng.integers(0, 2, size=(500, 5)), [2] * 5
        )
        loose, _ = pc_stable(data, alpha=0.999)
        strict, _ = pc_stable(data, alpha=0.05)
        assert strict.edge_count <= loose.edge_count

    def test_overwhelming_dependence_survives_tiny_alpha(self, rng):
        bn = identifiable_random_bn(
            ("A", "B"), {"A": 2, "B": 2}, rng, edge_prob=1.0, min_edges=1
        )
        data = sample(bn, 5000, rng)
        g, _ = pc_stable(data, alpha=1e-12)
        assert g.has_edge("A", "B")

    def test_max_condition_limits_tests(self, rng):
        # with max_condition=0 only marginal tests run; a chain keeps its
        # middle pair because no conditioning can separate the endpoints
        bn = identifiable_random_bn(
            ("A", "B", "C"), {n: 3 for n in "ABC"}, rng, edge_prob=1.0, min_edges=2
        )
        data = sample(bn, 4000, rng)
        g0, _ = pc_stable(data, max_condition=0)
        g3, _ = pc_stable(data, max_condition=3)
        assert g0.edge_count >= g3.edge_count

    def test_recovers_four_node_structures(self, rng):
        hits = 0
        for _ in range(10):
            bn = identifiable_random_bn(
                tuple("ABCD"),
                {n: 3 for n in "ABCD"},
                rng,
                edge_prob=0.5,
                min_edges=2,
            )
            data = sample(bn, 5000, rng)
            g, _ = pc_stable(data)
            if skeleton(g) == skeleton(bn.graph) and v_structures(g) == v_structures(
                bn.graph
            ):
                hits += 1
        assert hits >= 8
