import random

import pytest

from skipmon import (
    SKIP,
    BeliefAnalyzer,
    PairClass,
    SizeLimitError,
    ValidationError,
    belief_graph_dot,
    build_belief_graph,
    cinf_is_finite,
    classify_pairs,
    diagnoser_exists,
)
from conftest import belief, pair, product_from
from modelgen import random_small_product
from oracle import (
    confused_bruteforce,
    finitary_bruteforce,
    pair_polarity,
    very_confused_bruteforce,
)


class TestClassifyPairs:
    def test_branching_pairs(self, branching):
        classes = classify_pairs(branching)
        assert classes[pair(branching, "s2", "f")] is PairClass.POSITIVE
        assert classes[pair(branching, "s1", "q0")] is PairClass.NEGATIVE
        assert classes[pair(branching, "s0", "q0")] is PairClass.UNDECIDED
        # From s2 the letter b is emitted almost surely at some point.
        assert classes[pair(branching, "s2", "q0")] is PairClass.POSITIVE

    def test_cycle_pairs(self, cycle):
        classes = classify_pairs(cycle)
        assert classes[pair(cycle, "B", "q0")] is PairClass.NEGATIVE
        assert classes[pair(cycle, "A", "f")] is PairClass.POSITIVE

    def test_against_dense_oracle(self):
        for seed in range(60):
            product = random_small_product(seed)
            classes = classify_pairs(product)
            negative, positive = pair_polarity(product)
            for p in range(product.n_pairs):
                assert (classes[p] is PairClass.NEGATIVE) == bool(negative[p])
                assert (classes[p] is PairClass.POSITIVE) == bool(positive[p])


class TestPrefixClassification:
    def test_skip_b_is_positively_deciding(self, branching):
        analyzer = BeliefAnalyzer(branching)
        result = analyzer.classify_prefix([SKIP, branching.mc.letter_index["b"]])
        assert result.positively_deciding and not result.negatively_deciding

    def test_all_a_prefixes_do_not_decide(self, branching):
        analyzer = BeliefAnalyzer(branching)
        a = branching.mc.letter_index["a"]
        for n in range(1, 4):
            assert not analyzer.classify_prefix([a] * n).deciding

    def test_empty_prefix_enabled(self, branching):
        analyzer = BeliefAnalyzer(branching)
        result = analyzer.classify_prefix([])
        assert result.enabled
        assert result.confused and not result.finitary

    def test_disabled_prefix_is_vacuously_settled(self, branching):
        analyzer = BeliefAnalyzer(branching)
        result = analyzer.classify_prefix([branching.mc.letter_index["b"]])
        assert not result.enabled
        assert result.positively_deciding and result.negatively_deciding
        assert result.very_confused and not result.confused and result.finitary

    def test_rejects_foreign_letters(self, branching):
        analyzer = BeliefAnalyzer(branching)
        with pytest.raises(ValidationError):
            analyzer.classify_prefix([99])


class TestBeliefGraph:
    def test_branching_graph_nodes(self, branching):
        graph = build_belief_graph(
            branching, [(branching.mc.initial, branching.initial_belief)]
        )
        b1 = belief(branching, ("s1", "q0"), ("s2", "q0"))
        b2 = belief(branching, ("s2", "f"))
        s = branching.mc.state_index
        expected = {
            (s["s0"], branching.initial_belief),
            (s["s1"], b1),
            (s["s2"], b1),
            (s["s2"], b2),
        }
        assert set(graph.nodes) == expected

    def test_single_absorbing_pair(self):
        product = product_from(
            "[mc]\ninitial s\ntrans s a 1 s\n[dfa]\ninitial q\naccepting f\n"
            "trans q a q\ntrans f a f\n"
        )
        graph = build_belief_graph(product, [(0, product.initial_belief)])
        assert len(graph.nodes) == 1
        assert graph.edges[0] == [(0, 0)]

    def test_node_cap(self, branching):
        with pytest.raises(SizeLimitError):
            build_belief_graph(
                branching, [(branching.mc.initial, branching.initial_belief)], cap=1
            )

    def test_dot_export_mentions_every_node(self, branching):
        analyzer = BeliefAnalyzer(branching)
        graph = analyzer.belief_graph(branching.initial_belief)
        analyzer.ensure_very_confused_marks(graph)
        dot = belief_graph_dot(branching, graph)
        assert dot.count("label=") >= len(graph.nodes) + sum(len(e) for e in graph.edges)
        assert dot.startswith("digraph")


class TestBeliefPredicates:
    def test_cycle_very_confused(self, cycle):
        analyzer = BeliefAnalyzer(cycle)
        b3 = belief(cycle, ("B", "q0"), ("B", "f"))
        assert analyzer.is_very_confused(b3)

    def test_deciding_belief_not_very_confused(self, cycle):
        analyzer = BeliefAnalyzer(cycle)
        assert not analyzer.is_very_confused(belief(cycle, ("B", "f")))

    def test_branching_enabled_beliefs_not_very_confused(self, branching):
        analyzer = BeliefAnalyzer(branching)
        nfa = branching.nfa
        seen = {branching.initial_belief}
        frontier = [branching.initial_belief]
        while frontier:
            current = frontier.pop()
            if current:
                assert not analyzer.is_very_confused(current)
            for obs in [SKIP] + list(range(branching.n_letters)):
                nxt = nfa.step(current, obs)
                if nxt and nxt not in seen:
                    seen.add(nxt)
                    frontier.append(nxt)

    def test_initial_confusion(self, branching, cycle):
        assert BeliefAnalyzer(branching).is_confused(branching.initial_belief)
        assert not BeliefAnalyzer(cycle).is_confused(cycle.initial_belief)

    def test_cycle_mixed_belief_confused(self, cycle):
        analyzer = BeliefAnalyzer(cycle)
        b2 = belief(cycle, ("B", "q0"), ("A", "f"))
        assert analyzer.is_confused(b2)

    def test_singleton_deciding_not_confused(self, cycle):
        analyzer = BeliefAnalyzer(cycle)
        assert not analyzer.is_confused(belief(cycle, ("B", "q0")))

    def test_finitary(self, branching, cycle, lazy):
        assert not BeliefAnalyzer(branching).is_finitary(branching.initial_belief)
        assert BeliefAnalyzer(cycle).is_finitary(cycle.initial_belief)
        assert BeliefAnalyzer(lazy).is_finitary(lazy.initial_belief)

    def test_empty_belief_conventions(self, branching):
        analyzer = BeliefAnalyzer(branching)
        empty = frozenset()
        assert analyzer.is_very_confused(empty)
        assert not analyzer.is_confused(empty)
        assert analyzer.is_finitary(empty)


class TestTopLevelDecisions:
    def test_examples(self, branching, cycle):
        assert not diagnoser_exists(branching)
        assert diagnoser_exists(cycle)
        assert not cinf_is_finite(branching)
        assert cinf_is_finite(cycle)

    def test_all_negative_model_is_diagnosable(self):
        product = product_from(
            "[mc]\ninitial s\ntrans s a 1 s\n[dfa]\ninitial q\naccepting f\n"
            "trans q a q\ntrans f a f\n"
        )
        assert diagnoser_exists(product)
        assert cinf_is_finite(product)


class TestStructuralInvariants:
    def test_deciding_excludes_confusion(self):
        for seed in range(40):
            product = random_small_product(seed)
            analyzer = BeliefAnalyzer(product)
            graph = analyzer.belief_graph(product.initial_belief)
            analyzer.ensure_very_confused_marks(graph)
            for i, (_, b) in enumerate(graph.nodes):
                if graph.deciding[i]:
                    assert not analyzer.is_confused(b)
                if b and graph.very_confused[i]:
                    assert analyzer.is_confused(b)

    def test_prefix_matches_direct_belief_classification(self):
        rng = random.Random(3)
        for seed in range(30):
            product = random_small_product(seed)
            if len(product.mc.states) > 3:
                continue
            analyzer = BeliefAnalyzer(product)
            observations = [SKIP] + list(range(product.n_letters))
            for _ in range(8):
                prefix = [rng.choice(observations) for _ in range(rng.randint(0, 4))]
                via_prefix = analyzer.classify_prefix(prefix)
                b = product.nfa.step_word(product.initial_belief, prefix)
                assert via_prefix.enabled == bool(b)
                decision = analyzer.belief_decision(b)
                if b:
                    assert via_prefix.positively_deciding == (decision is PairClass.POSITIVE)
                    assert via_prefix.negatively_deciding == (decision is PairClass.NEGATIVE)
                assert via_prefix.confused == analyzer.is_confused(b)
                assert via_prefix.very_confused == analyzer.is_very_confused(b)
                assert via_prefix.finitary == analyzer.is_finitary(b)

    def test_diagnosable_implies_finite_cost(self):
        for seed in range(60):
            product = random_small_product(seed)
            analyzer = BeliefAnalyzer(product)
            if analyzer.diagnoser_exists():
                assert analyzer.cinf_is_finite()


class TestBruteForceAgreement:
    def test_initial_belief_predicates(self):
        for seed in range(40):
            product = random_small_product(seed)
            analyzer = BeliefAnalyzer(product)
            b0 = product.initial_belief
            assert analyzer.is_very_confused(b0) == very_confused_bruteforce(product, b0)
            assert analyzer.is_confused(b0) == confused_bruteforce(product, b0)
            assert analyzer.is_finitary(b0) == finitary_bruteforce(product, b0)
