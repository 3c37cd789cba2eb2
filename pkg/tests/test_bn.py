import itertools
import math

import numpy as np
import pytest

import oracles
from bnlab.bn import (
    BnError,
    Cpt,
    CvResult,
    DiscreteBn,
    UnseenConfigWithZeroSmoothing,
    ZeroProbabilityEvidence,
    cross_validate,
    default_effect_weights,
    do_intervene,
    effect_score,
    fit_cpts,
    intervention_effect,
    marginal,
    sensitivity,
)
from bnlab.data import CategoricalDataset, Column
from bnlab.graphs import Dag
from bnlab.synthetic import identifiable_random_bn, random_bn, random_dag, sample


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


def copy_chain_bn():
    """A -> B where B deterministically copies A; A uniform over 2 states."""
    dag = Dag.from_pairs(("A", "B"), [("A", "B")])
    cpts = {
        "A": Cpt("A", (), np.array([[0.5, 0.5]])),
        "B": Cpt("B", ("A",), np.array([[1.0, 0.0], [0.0, 1.0]])),
    }
    return DiscreteBn(dag, cpts, DiscreteBn.uniform_states({"A": 2, "B": 2}))


class TestCpt:
    def test_rows_must_sum_to_one(self):
        with pytest.raises(BnError):
            Cpt("A", (), np.array([[0.6, 0.6]]))

    def test_negative_rejected(self):
        with pytest.raises(BnError):
            Cpt("A", (), np.array([[1.2, -0.2]]))


class TestBnContainer:
    def test_parents_must_match_graph(self):
        dag = Dag.from_pairs(("A", "B"), [("A", "B")])
        cpts = {
            "A": Cpt("A", (), np.array([[0.5, 0.5]])),
            "B": Cpt("B", (), np.array([[0.5, 0.5]])),
        }
        with pytest.raises(BnError):
            DiscreteBn(dag, cpts, DiscreteBn.uniform_states({"A": 2, "B": 2}))

    def test_shape_checked(self):
        dag = Dag.from_pairs(("A", "B"), [("A", "B")])
        cpts = {
            "A": Cpt("A", (), np.array([[0.5, 0.5]])),
            "B": Cpt("B", ("A",), np.array([[0.5, 0.5]])),  # needs 2 rows
        }
        with pytest.raises(BnError):
            DiscreteBn(dag, cpts, DiscreteBn.uniform_states({"A": 2, "B": 2}))

    def test_state_lookup_by_label(self):
        bn = copy_chain_bn()
        assert bn.state_index("A", "s1") == 1
        with pytest.raises(BnError):
            bn.state_index("A", "nope")


class TestFit:
    def test_mle_without_smoothing(self):
        data = dataset_from_codes([[0], [0], [1], [1]], [2])
        bn = fit_cpts(Dag(("V0",)), data, alpha_smooth=0)
        assert bn.cpts["V0"].table == pytest.approx(np.array([[0.5, 0.5]]))

    def test_add_one_smoothing(self):
        data = dataset_from_codes([[0], [0], [0], [1]], [2])
        bn = fit_cpts(Dag(("V0",)), data, alpha_smooth=1)
        assert bn.cpts["V0"].table == pytest.approx(np.array([[4 / 6, 2 / 6]]))

    def test_unseen_config_uniform_with_smoothing(self):
        data = dataset_from_codes([[0, 0], [0, 1]], [2, 4])
        dag = Dag.from_pairs(("V0", "V1"), [("V0", "V1")])
        bn = fit_cpts(dag, data, alpha_smooth=1)
        # parent state 1 never occurs
        assert bn.cpts["V1"].table[1] == pytest.approx([0.25] * 4)

    def test_unseen_config_zero_smoothing_raises(self):
        data = dataset_from_codes([[0, 0], [0, 1]], [2, 2])
        dag = Dag.from_pairs(("V0", "V1"), [("V0", "V1")])
        with pytest.raises(UnseenConfigWithZeroSmoothing):
            fit_cpts(dag, data, alpha_smooth=0)

    def test_rows_sum_to_one(self, rng):
        arities = [2, 3, 4]
        data = dataset_from_codes(
            np.column_stack([rng.integers(0, r, 60) for r in arities]), arities
        )
        dag = random_dag(data.names, rng, 0.7)
        bn = fit_cpts(dag, data)
        for cpt in bn.cpts.values():
            assert cpt.table.sum(axis=1) == pytest.approx(
                np.ones(cpt.table.shape[0])
            )


class TestMarginal:
    def test_deterministic_chain(self):
        bn = copy_chain_bn()
        assert marginal(bn, "B", {"A": 1}) == pytest.approx([0.0, 1.0])

    def test_root_prior_without_evidence(self):
        bn = copy_chain_bn()
        assert marginal(bn, "A") == pytest.approx([0.5, 0.5])

    def test_evidence_by_state_label(self):
        bn = copy_chain_bn()
        assert marginal(bn, "B", {"A": "s0"}) == pytest.approx([1.0, 0.0])

    def test_target_in_evidence_rejected(self):
        bn = copy_chain_bn()
        with pytest.raises(BnError):
            marginal(bn, "A", {"A": 0})

    def test_zero_probability_evidence(self):
        dag = Dag.from_pairs(("A", "B"), [("A", "B")])
        cpts = {
            "A": Cpt("A", (), np.array([[1.0, 0.0]])),
            "B": Cpt("B", ("A",), np.array([[1.0, 0.0], [0.0, 1.0]])),
        }
        bn = DiscreteBn(dag, cpts, DiscreteBn.uniform_states({"A": 2, "B": 2}))
        with pytest.raises(ZeroProbabilityEvidence):
            marginal(bn, "A", {"B": 1})

    def test_matches_enumeration_on_random_bns(self, rng):
        for _ in range(40):
            p = int(rng.integers(2, 6))
            labels = tuple("ABCDE"[:p])
            arities = {n: int(rng.integers(2, 5)) for n in labels}
            bn = random_bn(random_dag(labels, rng, 0.6), arities, rng)
            target = labels[int(rng.integers(0, p))]
            others = [n for n in labels if n != target]
            k = int(rng.integers(0, len(others) + 1))
            ev_nodes = list(rng.choice(others, size=k, replace=False)) if k else []
            evidence = {n: int(rng.integers(0, arities[n])) for n in ev_nodes}
            try:
                got = marginal(bn, target, evidence)
            except ZeroProbabilityEvidence:
                with pytest.raises(ZeroDivisionError):
                    oracles.marginal_by_enumeration(bn, target, evidence)
                continue
            expect = oracles.marginal_by_enumeration(bn, target, evidence)
            assert got == pytest.approx(expect, abs=1e-10)


class TestInterventions:
    def test_do_cuts_incoming_edges(self):
        bn = copy_chain_bn()
        cut = do_intervene(bn, "B", 0)
        assert cut.graph.edge_count == 0
        assert marginal(cut, "B") == pytest.approx([1.0, 0.0])

    def test_do_on_root_equals_conditioning(self, rng):
        for _ in range(10):
            labels = tuple("ABCD")
            arities = {n: 3 for n in labels}
            bn = random_bn(random_dag(labels, rng, 0.6), arities, rng)
            roots = [n for n in labels if not bn.graph.parents(n)]
            root = roots[0]
            for target in labels:
                if target == root:
                    continue
                try:
                    seen = marginal(bn, target, {root: 1})
                except ZeroProbabilityEvidence:
                    continue
                done = marginal(do_intervene(bn, root, 1), target)
                assert done == pytest.approx(seen, abs=1e-10)

    def test_collider_do_leaves_parents_alone(self):
        dag = Dag.from_pairs(("A", "B", "C"), [("A", "C"), ("B", "C")])
        rng = np.random.default_rng(5)
        bn = random_bn(dag, {"A": 2, "B": 2, "C": 2}, rng)
        base_a = marginal(bn, "A")
        cut = do_intervene(bn, "C", 1)
        assert marginal(cut, "A") == pytest.approx(base_a, abs=1e-12)
        assert marginal(cut, "B") == pytest.approx(marginal(bn, "B"), abs=1e-12)

    def test_do_matches_truncated_enumeration(self, rng):
        for _ in range(15):
            labels = tuple("ABCDE")
            arities = {n: int(rng.integers(2, 4)) for n in labels}
            bn = random_bn(random_dag(labels, rng, 0.5), arities, rng)
            node = labels[int(rng.integers(0, 5))]
            s = int(rng.integers(0, arities[node]))
            cut = do_intervene(bn, node, s)
            for target in labels:
                if target == node:
                    continue
                got = marginal(cut, target)
                expect = oracles.marginal_by_enumeration(cut, target)
                assert got == pytest.approx(expect, abs=1e-10)


class TestEffectScore:
    def test_worked_four_state_example(self):
        low = (0.5, 0.25, 0.15, 0.1)
        high = (0.6, 0.3, 0.1, 0.0)
        assert effect_score(low, high) == pytest.approx(0.1165, abs=1e-12)
        assert low @ np.array(default_effect_weights(4)) == pytest.approx(
            0.2815, abs=1e-12
        )

    def test_identical_distributions(self):
        d = (0.3, 0.4, 0.2, 0.1)
        assert effect_score(d, d) == 0.0

    def test_point_masses_at_extremes(self):
        assert effect_score((1, 0, 0, 0), (0, 0, 0, 1)) == pytest.approx(1.0)

    def test_symmetric(self):
        a = (0.2, 0.5, 0.2, 0.1)
        b = (0.1, 0.1, 0.3, 0.5)
        assert effect_score(a, b) == effect_score(b, a)

    def test_default_weights(self):
        assert default_effect_weights(4) == (0.0, 0.33, 0.66, 1.0)
        assert default_effect_weights(3) == (0.0, 0.5, 1.0)
        assert default_effect_weights(5) == (0.0, 0.25, 0.5, 0.75, 1.0)
        with pytest.raises(BnError):
            default_effect_weights(1)

    def test_length_mismatch(self):
        with pytest.raises(BnError):
            effect_score((0.5, 0.5), (1.0, 0.0, 0.0))


class TestInterventionEffect:
    def test_non_descendant_target_zero(self, rng):
        dag = Dag.from_pairs(("A", "B", "C"), [("A", "B"), ("A", "C")])
        bn = random_bn(dag, {"A": 3, "B": 3, "C": 3}, rng)
        # B and C are siblings: forcing B cannot move C
        assert intervention_effect(bn, "B", "C") == pytest.approx(0.0, abs=1e-12)

    def test_deterministic_copy_chain_is_one(self):
        bn = copy_chain_bn()
        assert intervention_effect(bn, "A", "B") == pytest.approx(1.0)

    def test_same_node_rejected(self):
        bn = copy_chain_bn()
        with pytest.raises(BnError):
            intervention_effect(bn, "A", "A")

    def test_matches_enumeration(self, rng):
        for _ in range(10):
            labels = tuple("ABCDE")
            arities = {n: int(rng.integers(2, 5)) for n in labels}
            bn = random_bn(random_dag(labels, rng, 0.5), arities, rng)
            do_node, target = rng.choice(labels, size=2, replace=False)
            lo = oracles.marginal_by_enumeration(
                do_intervene(bn, do_node, 0), target
            )
            hi = oracles.marginal_by_enumeration(
                do_intervene(bn, do_node, arities[do_node] - 1), target
            )
            w = np.array(default_effect_weights(arities[target]))
            expect = abs(float(lo @ w) - float(hi @ w))
            assert intervention_effect(bn, do_node, target) == pytest.approx(
                expect, abs=1e-10
            )


class TestSensitivity:
    def test_no_ancestors_all_zero(self, rng):
        dag = Dag.from_pairs(("A", "B", "C"), [("A", "B"), ("A", "C")])
        bn = random_bn(dag, {"A": 2, "B": 2, "C": 2}, rng)
        out = sensitivity(bn, "A")
        assert out == {"B": 0.0, "C": 0.0}

    def test_target_excluded_from_map(self, rng):
        bn = copy_chain_bn()
        assert "B" not in sensitivity(bn, "B")

    def test_non_ancestor_exactly_zero(self, rng):
        dag = Dag.from_pairs(
            ("A", "B", "C", "D"), [("A", "B"), ("B", "C"), ("D", "A")]
        )
        bn = random_bn(dag, {n: 3 for n in "ABCD"}, rng)
        out = sensitivity(bn, "B")
        assert out["C"] == 0.0
        assert out["A"] > 0.0 and out["D"] >= 0.0

    def test_parent_perturbation_matches_direct_reinference(self):
        # A uniform prior, B copies A; nudging A's prior by eps moves B's
        # marginal by exactly eps in each direction (L1 = 2 eps)
        bn = copy_chain_bn()
        eps = 0.1
        out = sensitivity(bn, "B", epsilon=eps)
        assert out["A"] == pytest.approx(2 * eps, abs=1e-12)

    def test_epsilon_validated(self):
        bn = copy_chain_bn()
        with pytest.raises(BnError):
            sensitivity(bn, "B", epsilon=0.7)

    def test_rows_remain_distributions(self, rng):
        labels = tuple("ABCD")
        bn = random_bn(random_dag(labels, rng, 0.7), {n: 3 for n in labels}, rng)
        sensitivity(bn, labels[-1], epsilon=0.3)
        for cpt in bn.cpts.values():
            assert cpt.table.sum(axis=1) == pytest.approx(
                np.ones(cpt.table.shape[0])
            )


class TestCrossValidate:
    def test_folds_partition_rows(self, rng):
        data = dataset_from_codes(
            np.column_stack([rng.integers(0, 2, 100)]), [2]
        )
        res = cross_validate(Dag(data.names), data, k=7, seed=1)
        assert sum(res.fold_sizes) == 100
        assert len(res.fold_sizes) == 7

    def test_majority_class_baseline(self, rng):
        codes = (rng.random(2000) > 0.7).astype(int).reshape(-1, 1)
        data = dataset_from_codes(codes, [2])
        res = cross_validate(Dag(data.names), data, k=10, seed=3)
        assert res.mean_accuracy == pytest.approx(0.7, abs=0.05)

    def test_deterministic_relation_high_accuracy(self, rng):
        bn = copy_chain_bn()
        data = sample(bn, 2000, rng)
        dag = Dag.from_pairs(("A", "B"), [("A", "B")])
        res = cross_validate(dag, data, k=10, seed=0)
        assert res.per_node["B"] >= 0.99
        assert res.per_node["A"] >= 0.99

    def test_seed_changes_split_not_contract(self, rng):
        data = sample(copy_chain_bn(), 300, rng)
        dag = Dag.from_pairs(("A", "B"), [("A", "B")])
        r1 = cross_validate(dag, data, k=5, seed=1)
        r2 = cross_validate(dag, data, k=5, seed=1)
        assert r1 == r2

    def test_k_validation(self, rng):
        data = sample(copy_chain_bn(), 50, rng)
        with pytest.raises(BnError):
            cross_validate(Dag(("A", "B")), data, k=1)

    def test_prediction_uses_markov_blanket(self, rng):
        # chain A -> B -> C: predicting B from both neighbours beats either
        # marginal; accuracy must exceed the majority baseline of B
        bn = identifiable_random_bn(
            ("A", "B", "C"), {n: 2 for n in "ABC"}, rng, edge_prob=1.0, min_edges=2
        )
        data = sample(bn, 2000, rng)
        res = cross_validate(bn.graph, data, k=5, seed=0)
        marg = np.bincount(data.codes[:, 1], minlength=2).max() / 2000
        assert res.per_node["B"] >= marg - 0.02
