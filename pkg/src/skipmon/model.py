"""Labelled Markov chains, property DFAs, their product, and belief tracking.

Model text format (UTF-8, line oriented, ``#`` starts a comment, tokens are
whitespace separated)::

    [mc]
    initial s0
    trans s0 a 1/2 s1        # source letter probability target
    ...
    [dfa]
    initial q0
    accepting f              # repeatable
    trans q0 b f             # source letter target

Identifiers match ``[A-Za-z0-9_.-]+``.  Both sections are required and
``[mc]`` must come first.  Probabilities are exact rationals (a bare integer
``1`` is accepted for ``1/1``) and parallel edges with the same
(source, letter, target) are summed.  The DFA must be total over the chain's
alphabet on its non-accepting states; accepting states are normalized away
into a single absorbing accepting state.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Iterable

#: Observation index standing for "letter not seen".  Distinct from every
#: letter index (letters are interned to 0, 1, ...).
SKIP = -1

#: A belief is a set of product-pair indices.
Belief = frozenset

ZERO = Fraction(0)
ONE = Fraction(1)


class ModelError(Exception):
    """Base class for everything this package raises on bad input."""


class ParseError(ModelError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class ValidationError(ModelError):
    """Structural violation: stochasticity, totality, unknown references."""


class NotNonHiddenError(ModelError):
    """Raised by operations that require a non-hidden chain."""


class SizeLimitError(ModelError):
    """Belief-space exploration exceeded the configured node cap."""


class CapabilityError(ModelError):
    """The request is outside what the model class supports."""


_IDENT_RE = re.compile(r"[A-Za-z0-9_.\-]+\Z")


def _check_ident(token: str, line: int) -> str:
    if not _IDENT_RE.match(token):
        raise ParseError(f"invalid identifier {token!r}", line)
    return token


def parse_probability(token: str, line: int | None = None) -> Fraction:
    """Parse ``num/den`` (or a bare integer) into an exact fraction."""
    try:
        if "/" in token:
            num, den = token.split("/", 1)
            value = Fraction(int(num), int(den))
        else:
            value = Fraction(int(token))
    except (ValueError, ZeroDivisionError) as exc:
        raise ParseError(f"invalid probability {token!r}: {exc}", line) from None
    if value < 0:
        raise ParseError(f"negative probability {token!r}", line)
    return value


@dataclass
class Mc:
    """A finite labelled Markov chain with exact rational transitions.

    ``matrices[a][s][t]`` is the probability of emitting letter ``a`` while
    moving from state ``s`` to state ``t``.  Summed over all letters the
    matrix must be stochastic.  Instances are immutable by convention and
    safe to share across threads.
    """

    states: list[str]
    alphabet: list[str]
    matrices: list[list[list[Fraction]]]
    initial: int

    def __post_init__(self):
        self.state_index = {name: i for i, name in enumerate(self.states)}
        self.letter_index = {name: i for i, name in enumerate(self.alphabet)}
        if len(self.state_index) != len(self.states):
            raise ValidationError("duplicate state names")
        if len(self.letter_index) != len(self.alphabet):
            raise ValidationError("duplicate letter names")
        self._validate()

    def _validate(self):
        n = len(self.states)
        if len(self.matrices) != len(self.alphabet):
            raise ValidationError("one transition matrix per letter required")
        for a, matrix in enumerate(self.matrices):
            if len(matrix) != n or any(len(row) != n for row in matrix):
                raise ValidationError(f"matrix for letter {self.alphabet[a]!r} is not {n}x{n}")
            for row in matrix:
                for p in row:
                    if p < 0:
                        raise ValidationError("negative transition probability")
        for s in range(n):
            total = sum(self.matrices[a][s][t] for a in range(len(self.alphabet)) for t in range(n))
            if total != 1:
                raise ValidationError(
                    f"state {self.states[s]!r}: outgoing probabilities sum to {total}, expected 1"
                )

    def successors(self, s: int, a: int) -> list[int]:
        row = self.matrices[a][s]
        return [t for t, p in enumerate(row) if p]

    def non_hidden_targets(self) -> dict[int, int] | None:
        """Per-letter target state, or None if some letter does not pin one down.

        A chain is non-hidden when all non-zero entries of each letter's
        matrix sit in a single column; unused letters are simply omitted
        from the map.
        """
        targets: dict[int, int] = {}
        for a, matrix in enumerate(self.matrices):
            columns = {t for row in matrix for t, p in enumerate(row) if p}
            if len(columns) > 1:
                return None
            if columns:
                targets[a] = columns.pop()
        return targets


def is_non_hidden(mc: Mc) -> bool:
    return mc.non_hidden_targets() is not None


@dataclass
class Dfa:
    """A total DFA with a single absorbing accepting state.

    A word over the chain's alphabet is accepted as soon as some finite
    prefix reaches the accepting state, so acceptance is a reachability
    property and the normal form above loses no generality.
    """

    states: list[str]
    alphabet: list[str]
    delta: list[list[int]]
    initial: int
    accepting: int

    def __post_init__(self):
        self.state_index = {name: i for i, name in enumerate(self.states)}
        if len(self.state_index) != len(self.states):
            raise ValidationError("duplicate DFA state names")
        n = len(self.states)
        if len(self.delta) != n or any(len(row) != len(self.alphabet) for row in self.delta):
            raise ValidationError("DFA transition table has wrong shape")
        for row in self.delta:
            for t in row:
                if not 0 <= t < n:
                    raise ValidationError("DFA transition target out of range")
        if any(t != self.accepting for t in self.delta[self.accepting]):
            raise ValidationError("accepting state must be absorbing")


def _fresh_name(base: str, used: Iterable[str]) -> str:
    used = set(used)
    name = base
    while name in used:
        name += "_"
    return name


def build_dfa(
    states: list[str],
    alphabet: list[str],
    transitions: dict[tuple[str, str], str],
    initial: str,
    accepting: Iterable[str],
) -> Dfa:
    """Intern a raw DFA description and normalize the accepting set.

    Multiple (or non-absorbing, or missing) accepting states are replaced by
    one fresh absorbing sink; every transition into the old accepting set is
    redirected there.  Transitions leaving accepting states are irrelevant
    (the word is accepted the moment the set is entered) and may be omitted
    in the input; non-accepting states must be total.
    """
    accepting_set = set(accepting)
    unknown = accepting_set - set(states)
    if unknown:
        raise ValidationError(f"unknown accepting state {sorted(unknown)[0]!r}")
    if initial not in states:
        raise ValidationError(f"unknown initial DFA state {initial!r}")
    for (src, letter), dst in transitions.items():
        if src not in states or dst not in states:
            missing = src if src not in states else dst
            raise ValidationError(f"unknown DFA state {missing!r}")
        if letter not in alphabet:
            raise ValidationError(f"unknown letter {letter!r} in DFA transition")

    def total_row(name: str) -> list[str] | None:
        row = []
        for letter in alphabet:
            dst = transitions.get((name, letter))
            if dst is None:
                return None
            row.append(dst)
        return row

    if len(accepting_set) == 1:
        acc = next(iter(accepting_set))
        row = total_row(acc)
        if row is not None and all(dst == acc for dst in row):
            # Already in normal form: keep the input states and names.
            delta = []
            for name in states:
                row = total_row(name)
                if row is None:
                    missing = next(l for l in alphabet if (name, l) not in transitions)
                    raise ValidationError(f"missing DFA transition from {name!r} on {missing!r}")
                delta.append([states.index(dst) for dst in row])
            return Dfa(list(states), list(alphabet), delta, states.index(initial), states.index(acc))

    kept = [name for name in states if name not in accepting_set]
    if len(accepting_set) == 1:
        sink = next(iter(accepting_set))
    else:
        sink = _fresh_name("acc", kept)
    new_states = kept + [sink]
    index = {name: i for i, name in enumerate(new_states)}
    sink_i = index[sink]
    delta = []
    for name in kept:
        row = []
        for letter in alphabet:
            dst = transitions.get((name, letter))
            if dst is None:
                raise ValidationError(f"missing DFA transition from {name!r} on {letter!r}")
            row.append(sink_i if dst in accepting_set else index[dst])
        delta.append(row)
    delta.append([sink_i] * len(alphabet))
    initial_i = sink_i if initial in accepting_set else index[initial]
    return Dfa(new_states, list(alphabet), delta, initial_i, sink_i)


def load_model(text: str) -> tuple[Mc, Dfa]:
    """Parse and validate a model file, returning the chain and the DFA."""
    section = None
    mc_initial: str | None = None
    mc_states: list[str] = []
    mc_state_set: set[str] = set()
    letters: list[str] = []
    letter_set: set[str] = set()
    mc_trans: dict[tuple[str, str, str], Fraction] = {}
    dfa_initial: str | None = None
    dfa_states: list[str] = []
    dfa_state_set: set[str] = set()
    dfa_accepting: list[str] = []
    dfa_trans: dict[tuple[str, str], str] = {}

    def add_mc_state(name):
        if name not in mc_state_set:
            mc_state_set.add(name)
            mc_states.append(name)

    def add_letter(name):
        if name not in letter_set:
            letter_set.add(name)
            letters.append(name)

    def add_dfa_state(name):
        if name not in dfa_state_set:
            dfa_state_set.add(name)
            dfa_states.append(name)

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line == "[mc]":
            if section is not None:
                raise ParseError("[mc] section must come first and appear once", lineno)
            section = "mc"
            continue
        if line == "[dfa]":
            if section != "mc":
                raise ParseError("[dfa] section must follow the [mc] section", lineno)
            section = "dfa"
            continue
        if section is None:
            raise ParseError("content before the [mc] section", lineno)
        tokens = line.split()
        keyword = tokens[0]
        if section == "mc":
            if keyword == "initial":
                if len(tokens) != 2:
                    raise ParseError("expected: initial <state>", lineno)
                if mc_initial is not None:
                    raise ParseError("duplicate initial state declaration", lineno)
                mc_initial = _check_ident(tokens[1], lineno)
                add_mc_state(mc_initial)
            elif keyword == "trans":
                if len(tokens) != 5:
                    raise ParseError("expected: trans <src> <letter> <num>/<den> <dst>", lineno)
                src = _check_ident(tokens[1], lineno)
                letter = _check_ident(tokens[2], lineno)
                prob = parse_probability(tokens[3], lineno)
                dst = _check_ident(tokens[4], lineno)
                add_mc_state(src)
                add_letter(letter)
                add_mc_state(dst)
                key = (src, letter, dst)
                mc_trans[key] = mc_trans.get(key, ZERO) + prob
            else:
                raise ParseError(f"unknown [mc] directive {keyword!r}", lineno)
        else:
            if keyword == "initial":
                if len(tokens) != 2:
                    raise ParseError("expected: initial <state>", lineno)
                if dfa_initial is not None:
                    raise ParseError("duplicate initial state declaration", lineno)
                dfa_initial = _check_ident(tokens[1], lineno)
                add_dfa_state(dfa_initial)
            elif keyword == "accepting":
                if len(tokens) != 2:
                    raise ParseError("expected: accepting <state>", lineno)
                name = _check_ident(tokens[1], lineno)
                add_dfa_state(name)
                dfa_accepting.append(name)
            elif keyword == "trans":
                if len(tokens) != 4:
                    raise ParseError("expected: trans <src> <letter> <dst>", lineno)
                src = _check_ident(tokens[1], lineno)
                letter = _check_ident(tokens[2], lineno)
                dst = _check_ident(tokens[3], lineno)
                if letter not in letter_set:
                    raise ParseError(f"unknown letter {letter!r} (not used in the [mc] section)", lineno)
                add_dfa_state(src)
                add_dfa_state(dst)
                prev = dfa_trans.get((src, letter))
                if prev is not None and prev != dst:
                    raise ParseError(f"conflicting DFA transitions from {src!r} on {letter!r}", lineno)
                dfa_trans[(src, letter)] = dst
            else:
                raise ParseError(f"unknown [dfa] directive {keyword!r}", lineno)

    if section != "dfa":
        raise ParseError("model file needs both an [mc] and a [dfa] section")
    if mc_initial is None:
        raise ValidationError("missing initial state in [mc] section")
    if dfa_initial is None:
        raise ValidationError("missing initial state in [dfa] section")

    n = len(mc_states)
    sidx = {name: i for i, name in enumerate(mc_states)}
    lidx = {name: i for i, name in enumerate(letters)}
    matrices = [[[ZERO] * n for _ in range(n)] for _ in letters]
    for (src, letter, dst), prob in mc_trans.items():
        matrices[lidx[letter]][sidx[src]][sidx[dst]] += prob
    mc = Mc(mc_states, letters, matrices, sidx[mc_initial])
    dfa = build_dfa(dfa_states, letters, dfa_trans, dfa_initial, dfa_accepting)
    return mc, dfa


def format_model(mc: Mc, dfa: Dfa) -> str:
    """Serialize a chain/DFA pair back into the model file format."""
    lines = ["[mc]", f"initial {mc.states[mc.initial]}"]
    for s, src in enumerate(mc.states):
        for a, letter in enumerate(mc.alphabet):
            for t, dst in enumerate(mc.states):
                p = mc.matrices[a][s][t]
                if p:
                    lines.append(f"trans {src} {letter} {p.numerator}/{p.denominator} {dst}")
    lines.append("[dfa]")
    lines.append(f"initial {dfa.states[dfa.initial]}")
    lines.append(f"accepting {dfa.states[dfa.accepting]}")
    for q, src in enumerate(dfa.states):
        for a, letter in enumerate(dfa.alphabet):
            lines.append(f"trans {src} {letter} {dfa.states[dfa.delta[q][a]]}")
    return "\n".join(lines) + "\n"


@dataclass
class BeliefNfa:
    """Successor sets of the belief automaton over letters and the skip symbol.

    ``letter_succ[p][a]`` lists the product pairs compatible with observing
    letter ``a`` from pair ``p``; ``skip_succ[p]`` is their union over all
    letters, i.e. the successors when the emitted letter was not seen.
    """

    letter_succ: list[list[tuple[int, ...]]]
    skip_succ: list[tuple[int, ...]]

    def step(self, belief: frozenset, obs: int) -> frozenset:
        out: set[int] = set()
        if obs == SKIP:
            for p in belief:
                out.update(self.skip_succ[p])
        else:
            for p in belief:
                out.update(self.letter_succ[p][obs])
        return frozenset(out)

    def step_word(self, belief: frozenset, observations: Iterable[int]) -> frozenset:
        for o in observations:
            belief = self.step(belief, o)
        return belief


def belief_step(nfa: BeliefNfa, belief: frozenset, obs: int) -> frozenset:
    """One belief-automaton step; the empty belief is a fixed point."""
    return nfa.step(belief, obs)


@dataclass
class ProductMc:
    """The synchronous product of a chain and a DFA.

    Pairs (s, q) are interned as ``s * |Q| + q``; all pairs are kept, even
    unreachable ones, and analyses restrict to reachable sets themselves.
    """

    mc: Mc
    dfa: Dfa

    def __post_init__(self):
        self.n_states = len(self.mc.states)
        self.n_dfa = len(self.dfa.states)
        self.n_letters = len(self.mc.alphabet)
        self.n_pairs = self.n_states * self.n_dfa
        self.initial_pair = self.pair_index(self.mc.initial, self.dfa.initial)
        self.initial_belief = frozenset({self.initial_pair})
        rows: list[list[list[tuple[int, Fraction]]]] = []
        for a in range(self.n_letters):
            matrix = self.mc.matrices[a]
            letter_rows = []
            for p in range(self.n_pairs):
                s, q = divmod(p, self.n_dfa)
                q2 = self.dfa.delta[q][a]
                letter_rows.append(
                    [(self.pair_index(t, q2), prob) for t, prob in enumerate(matrix[s]) if prob]
                )
            rows.append(letter_rows)
        self.rows = rows

    def pair_index(self, s: int, q: int) -> int:
        return s * self.n_dfa + q

    def pair_state(self, p: int) -> tuple[int, int]:
        return divmod(p, self.n_dfa)

    def pair_name(self, p: int) -> tuple[str, str]:
        s, q = divmod(p, self.n_dfa)
        return self.mc.states[s], self.dfa.states[q]

    @cached_property
    def nfa(self) -> BeliefNfa:
        letter_succ = []
        skip_succ = []
        for p in range(self.n_pairs):
            per_letter = [tuple(dst for dst, _ in self.rows[a][p]) for a in range(self.n_letters)]
            letter_succ.append(per_letter)
            union: set[int] = set()
            for succ in per_letter:
                union.update(succ)
            skip_succ.append(tuple(sorted(union)))
        return BeliefNfa(letter_succ, skip_succ)

    def combined_row(self, p: int) -> dict[int, Fraction]:
        """The one-step distribution from pair p, letters marginalized out."""
        out: dict[int, Fraction] = {}
        for a in range(self.n_letters):
            for dst, prob in self.rows[a][p]:
                out[dst] = out.get(dst, ZERO) + prob
        return out

    def reachable_pairs(self) -> list[int]:
        seen = {self.initial_pair}
        frontier = [self.initial_pair]
        while frontier:
            p = frontier.pop()
            for dst in self.nfa.skip_succ[p]:
                if dst not in seen:
                    seen.add(dst)
                    frontier.append(dst)
        return sorted(seen)


def compose(mc: Mc, dfa: Dfa) -> ProductMc:
    """Build the product chain; the two components must share an alphabet."""
    if mc.alphabet != dfa.alphabet:
        raise ValidationError("chain and DFA alphabets differ")
    return ProductMc(mc, dfa)
