import random
from fractions import Fraction

import pytest

from skipmon import (
    SKIP,
    ParseError,
    ValidationError,
    belief_step,
    build_dfa,
    compose,
    format_model,
    is_non_hidden,
    load_model,
)
from conftest import BRANCHING_MODEL, CYCLE_MODEL, belief, pair, product_from
from modelgen import random_small_product


class TestLoadModel:
    def test_branching_example(self):
        mc, dfa = load_model(BRANCHING_MODEL)
        assert len(mc.states) == 3
        assert len(dfa.states) == 2
        assert mc.alphabet == ["a", "b"]
        assert mc.matrices[0][0][1] == Fraction(1, 2)

    def test_single_self_loop(self):
        mc, dfa = load_model(
            "[mc]\ninitial s\ntrans s a 1/1 s\n[dfa]\ninitial q\naccepting q\n"
        )
        assert mc.states == ["s"]
        assert sum(mc.matrices[0][0]) == 1
        # An accepting initial state accepts everything.
        assert dfa.initial == dfa.accepting

    def test_integer_probability_token(self):
        mc, _ = load_model("[mc]\ninitial s\ntrans s a 1 s\n[dfa]\ninitial q\naccepting q\n")
        assert mc.matrices[0][0][0] == 1

    def test_substochastic_row_rejected(self):
        bad = (
            "[mc]\ninitial s0\ntrans s0 a 1/2 s0\ntrans s0 b 1/4 s0\n"
            "[dfa]\ninitial q\naccepting q\n"
        )
        with pytest.raises(ValidationError) as err:
            load_model(bad)
        assert "s0" in str(err.value)
        assert "3/4" in str(err.value)

    def test_parallel_edges_are_summed(self):
        text = (
            "[mc]\ninitial s\ntrans s a 1/2 s\ntrans s a 1/2 s\n"
            "[dfa]\ninitial q\naccepting q\n"
        )
        mc, _ = load_model(text)
        assert mc.matrices[0][0][0] == 1

    def test_parse_error_carries_line_number(self):
        with pytest.raises(ParseError) as err:
            load_model("[mc]\ninitial s\ntrans s a\n[dfa]\ninitial q\n")
        assert err.value.line == 3

    def test_unknown_letter_in_dfa(self):
        text = (
            "[mc]\ninitial s\ntrans s a 1 s\n"
            "[dfa]\ninitial q\naccepting f\ntrans q z f\n"
        )
        with pytest.raises(ParseError) as err:
            load_model(text)
        assert "z" in str(err.value)

    def test_missing_dfa_transition(self):
        text = (
            "[mc]\ninitial s\ntrans s a 1/2 s\ntrans s b 1/2 s\n"
            "[dfa]\ninitial q\naccepting f\ntrans q a q\ntrans f a f\ntrans f b f\n"
        )
        with pytest.raises(ValidationError) as err:
            load_model(text)
        assert "'q'" in str(err.value) and "'b'" in str(err.value)

    def test_sections_required_in_order(self):
        with pytest.raises(ParseError):
            load_model("[dfa]\ninitial q\naccepting q\n")
        with pytest.raises(ParseError):
            load_model("[mc]\ninitial s\ntrans s a 1 s\n")

    def test_format_round_trip(self):
        mc, dfa = load_model(CYCLE_MODEL)
        text = format_model(mc, dfa)
        mc2, dfa2 = load_model(text)
        assert mc2.states == mc.states
        assert mc2.matrices == mc.matrices
        assert dfa2.delta == dfa.delta


class TestDfaNormalization:
    ALPHABET = ["a", "b"]

    def test_multiple_accepting_states_become_one_sink(self):
        dfa = build_dfa(
            ["q0", "q1", "q2"],
            self.ALPHABET,
            {
                ("q0", "a"): "q1",
                ("q0", "b"): "q2",
            },
            "q0",
            ["q1", "q2"],
        )
        assert dfa.states == ["q0", "acc"]
        assert [dfa.states[t] for t in dfa.delta[dfa.state_index["q0"]]] == ["acc", "acc"]
        assert dfa.delta[dfa.accepting] == [dfa.accepting] * 2

    def test_non_absorbing_accepting_state_is_rebuilt(self):
        dfa = build_dfa(
            ["q0", "f"],
            self.ALPHABET,
            {("q0", "a"): "f", ("q0", "b"): "q0", ("f", "a"): "q0", ("f", "b"): "q0"},
            "q0",
            ["f"],
        )
        # Acceptance is a reachability property, so f may be made absorbing.
        assert dfa.delta[dfa.accepting] == [dfa.accepting] * 2
        assert dfa.states == ["q0", "f"]

    def test_no_accepting_state_yields_empty_language(self):
        dfa = build_dfa(
            ["q0"],
            self.ALPHABET,
            {("q0", "a"): "q0", ("q0", "b"): "q0"},
            "q0",
            [],
        )
        assert dfa.accepting != dfa.initial
        # The accepting sink exists but nothing reaches it.
        assert all(
            t != dfa.accepting
            for q in range(len(dfa.states))
            if q != dfa.accepting
            for t in dfa.delta[q]
        )

    def test_accepting_initial_state(self):
        dfa = build_dfa(
            ["q0", "q1"],
            self.ALPHABET,
            {("q1", "a"): "q1", ("q1", "b"): "q1"},
            "q0",
            ["q0"],
        )
        assert dfa.initial == dfa.accepting


class TestCompose:
    def test_branching_reachable_pairs(self, branching):
        names = {branching.pair_name(p) for p in branching.reachable_pairs()}
        assert names == {("s0", "q0"), ("s1", "q0"), ("s2", "q0"), ("s2", "f")}

    def test_identity_composition(self):
        product = product_from(
            "[mc]\ninitial s\ntrans s a 1 s\n[dfa]\ninitial q\naccepting f\n"
            "trans q a q\ntrans f a f\n"
        )
        assert product.reachable_pairs() == [product.initial_pair]
        assert sum(p for _, p in product.rows[0][product.initial_pair]) == 1

    def test_cycle_reachable_pairs(self, cycle):
        names = {cycle.pair_name(p) for p in cycle.reachable_pairs()}
        assert names == {("A", "q0"), ("B", "q0"), ("C", "f"), ("A", "f"), ("B", "f")}

    def test_alphabet_mismatch(self):
        mc, _ = load_model(BRANCHING_MODEL)
        dfa = build_dfa(
            ["q"], ["a"], {("q", "a"): "q"}, "q", []
        )
        with pytest.raises(ValidationError):
            compose(mc, dfa)

    def test_row_sums_per_pair(self, cycle):
        for p in range(cycle.n_pairs):
            total = sum(prob for a in range(cycle.n_letters) for _, prob in cycle.rows[a][p])
            assert total == 1


class TestBeliefStep:
    def test_skip_then_b_reveals_acceptance(self, branching):
        nfa = branching.nfa
        b = nfa.step_word(branching.initial_belief, [SKIP, branching.mc.letter_index["b"]])
        assert b == belief(branching, ("s2", "f"))
        # Any continuation containing b gives the same belief.
        for suffix in ([0], [1], [0, 1]):
            extended = nfa.step_word(b, suffix)
            assert extended == belief(branching, ("s2", "f"))

    def test_a_then_skip(self, branching):
        nfa = branching.nfa
        b = nfa.step_word(branching.initial_belief, [branching.mc.letter_index["a"], SKIP])
        assert b == belief(branching, ("s1", "q0"), ("s2", "q0"), ("s2", "f"))

    def test_empty_belief_is_fixed(self, branching):
        nfa = branching.nfa
        assert belief_step(nfa, frozenset(), SKIP) == frozenset()
        assert belief_step(nfa, frozenset(), 0) == frozenset()

    def test_skip_is_union_of_letters(self):
        for seed in range(25):
            product = random_small_product(seed)
            nfa = product.nfa
            for p in range(product.n_pairs):
                union = set()
                for a in range(product.n_letters):
                    union.update(nfa.letter_succ[p][a])
                assert set(nfa.skip_succ[p]) == union

    def test_monotone_in_the_belief(self):
        rng = random.Random(7)
        for seed in range(25):
            product = random_small_product(seed)
            pairs = list(range(product.n_pairs))
            small = frozenset(rng.sample(pairs, rng.randint(0, len(pairs) // 2)))
            extra = frozenset(rng.sample(pairs, rng.randint(0, len(pairs) // 2)))
            big = small | extra
            for obs in [SKIP] + list(range(product.n_letters)):
                assert product.nfa.step(small, obs) <= product.nfa.step(big, obs)


class TestNonHidden:
    def test_cycle_targets(self, cycle):
        mc = cycle.mc
        targets = mc.non_hidden_targets()
        assert targets is not None
        assert {mc.alphabet[a]: mc.states[t] for a, t in targets.items()} == {
            "a": "A",
            "b": "B",
            "c": "C",
        }

    def test_branching_is_hidden(self, branching):
        assert not is_non_hidden(branching.mc)

    def test_single_state(self):
        mc, _ = load_model("[mc]\ninitial s\ntrans s a 1 s\n[dfa]\ninitial q\naccepting q\n")
        assert is_non_hidden(mc)


class TestMeasureAgreement:
    def test_product_preserves_word_probabilities(self):
        # Mass of each word in the chain equals its mass in the product.
        rng = random.Random(11)
        for seed in range(10):
            product = random_small_product(seed, max_pairs=6)
            mc = product.mc
            if len(mc.states) > 4:
                continue
            for _ in range(20):
                word = [rng.randrange(product.n_letters) for _ in range(rng.randint(0, 6))]
                vec = {mc.initial: Fraction(1)}
                for a in word:
                    nxt = {}
                    for s, mass in vec.items():
                        for t, prob in enumerate(mc.matrices[a][s]):
                            if prob:
                                nxt[t] = nxt.get(t, Fraction(0)) + mass * prob
                    vec = nxt
                direct = sum(vec.values(), Fraction(0))
                pvec = {product.initial_pair: Fraction(1)}
                for a in word:
                    nxt = {}
                    for p, mass in pvec.items():
                        for dst, prob in product.rows[a][p]:
                            nxt[dst] = nxt.get(dst, Fraction(0)) + mass * prob
                    pvec = nxt
                assert direct == sum(pvec.values(), Fraction(0))
