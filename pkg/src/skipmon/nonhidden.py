"""Monitor compilation for non-hidden chains.

In a non-hidden chain every letter identifies the successor state, so the
belief automaton restricted to letters is deterministic.  Confusion then
reduces to DFA language equivalence: a belief is confused exactly when some
single observation can split it into inequivalent pairs.  That makes the
maximal safe skip count (``cras``) computable by a shortest-path search, and
the resulting procrastination policy compiles into a finite table.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable

from .analysis import PairClass, classify_pairs
from .model import (
    SKIP,
    CapabilityError,
    NotNonHiddenError,
    ParseError,
    ProductMc,
    ValidationError,
    ZERO,
)

#: Marker letter of the procrastination chain meaning "decision made".
DOLLAR = "$"


@dataclass
class ObservedDfa:
    """The belief automaton without skip transitions, which is deterministic.

    ``trans[p][a]`` is the unique a-successor of pair p, or None when the
    chain cannot emit ``a`` there.  Accepting pairs are those whose run is
    surely correct (the positively deciding ones).
    """

    trans: list[list[int | None]]
    accepting: list[bool]


@dataclass
class EquivTable:
    """Language-equivalence classes of the observed DFA.

    Class ids are numbered by their least member in pair order, so they are
    stable across runs; the representative of a class is that least pair.
    """

    class_of: list[int]
    representatives: list[int]

    def equivalent(self, p: int, q: int) -> bool:
        return self.class_of[p] == self.class_of[q]

    def settled(self, belief: Iterable[int]) -> bool:
        return len({self.class_of[p] for p in belief}) <= 1


def _observed_dfa(product: ProductMc, pair_class: list[PairClass]) -> ObservedDfa:
    nfa = product.nfa
    trans: list[list[int | None]] = []
    for p in range(product.n_pairs):
        row: list[int | None] = []
        for a in range(product.n_letters):
            succ = nfa.letter_succ[p][a]
            row.append(succ[0] if succ else None)
        trans.append(row)
    accepting = [cls is PairClass.POSITIVE for cls in pair_class]
    return ObservedDfa(trans, accepting)


def _moore_partition(observed: ObservedDfa, n_letters: int) -> EquivTable:
    """Partition refinement from {accepting, rest}, with a virtual dead sink.

    Missing transitions go to the sink, which is non-accepting and absorbing;
    pairs with empty language end up in its block, which is exactly language
    equivalence on the completed automaton.
    """
    n = len(observed.trans)
    sink = n
    block = [1 if observed.accepting[p] else 0 for p in range(n)] + [0]
    while True:
        signatures = []
        for x in range(n + 1):
            if x == sink:
                succ = (block[sink],) * n_letters
            else:
                succ = tuple(
                    block[t] if (t := observed.trans[x][a]) is not None else block[sink]
                    for a in range(n_letters)
                )
            signatures.append((block[x], succ))
        renumber: dict[tuple, int] = {}
        new_block = []
        for sig in signatures:
            if sig not in renumber:
                renumber[sig] = len(renumber)
            new_block.append(renumber[sig])
        if new_block == block:
            break
        block = new_block
    class_ids: dict[int, int] = {}
    class_of = []
    representatives = []
    for p in range(n):
        b = block[p]
        if b not in class_ids:
            class_ids[b] = len(representatives)
            representatives.append(p)
        class_of.append(class_ids[b])
    return EquivTable(class_of, representatives)


def language_equivalence(product: ProductMc) -> EquivTable:
    """Language-equivalence classes of all product pairs (non-hidden only)."""
    if product.mc.non_hidden_targets() is None:
        raise NotNonHiddenError("language equivalence requires a non-hidden chain")
    pair_class = classify_pairs(product)
    return _moore_partition(_observed_dfa(product, pair_class), product.n_letters)


def is_settled(belief: Iterable[int], table: EquivTable) -> bool:
    """A belief is settled when all member pairs are language equivalent."""
    return table.settled(belief)


# -- exact integer matrix helpers -----------------------------------------


def _mat_mul(a: list[list[int]], b: list[list[int]]) -> list[list[int]]:
    n = len(a)
    bt = list(zip(*b))
    return [[sum(x * y for x, y in zip(row, col)) for col in bt] for row in a]


class _PowerCache:
    """Powers of an integer matrix; incremental below 65, squaring beyond."""

    def __init__(self, matrix: list[list[int]]):
        n = len(matrix)
        self._pows = {0: [[1 if i == j else 0 for j in range(n)] for i in range(n)], 1: matrix}

    def get(self, k: int) -> list[list[int]]:
        cached = self._pows.get(k)
        if cached is not None:
            return cached
        if k <= 64:
            result = _mat_mul(self.get(k - 1), self.get(1))
        else:
            half = k // 2
            result = _mat_mul(self.get(half), self.get(k - half))
        self._pows[k] = result
        return result


@dataclass
class ProcrastinationMc:
    """The chain of observations made by the procrastination policy.

    States are product pairs; letters are the alphabet plus the marker
    ``$``.  Deciding pairs loop on ``$`` with probability one; a
    non-deciding pair's row is its product row after ``skip_counts[p]``
    unobserved steps.  With K infinite, pairs whose safe skip count is
    unbounded get the ``$`` convention as well (``limit_pairs``): the cost
    system handles them as a closed-form limit, not by matrix powering.
    """

    product: ProductMc
    K: int | float
    skip_counts: list[int | None]
    rows: list[dict[int, dict[int, Fraction]]]
    limit_pairs: frozenset[int]
    dollar: int

    def combined_row(self, p: int) -> dict[int, Fraction]:
        out: dict[int, Fraction] = {}
        for letter, targets in self.rows[p].items():
            if letter == self.dollar:
                continue
            for dst, prob in targets.items():
                out[dst] = out.get(dst, ZERO) + prob
        return out


@dataclass
class MonitorNode:
    pair: tuple[str, str]
    skip: int
    edges: dict[str, int]
    verdict: str | None


@dataclass
class MonitorTable:
    """A compiled procrastination monitor.

    Node 0.. are discovered breadth-first from the start node; each node
    either carries a verdict or a skip count plus letter-indexed successor
    edges.  The textual form round-trips losslessly.
    """

    start: int
    nodes: list[MonitorNode]

    def to_text(self) -> str:
        lines = ["[monitor]", f"start {self.start}"]
        for i, node in enumerate(self.nodes):
            lines.append(f"node {i} pair {node.pair[0]},{node.pair[1]} skip {node.skip}")
        for i, node in enumerate(self.nodes):
            if node.verdict is not None:
                lines.append(f"verdict {i} {node.verdict}")
            else:
                for letter, dst in sorted(node.edges.items()):
                    lines.append(f"edge {i} {letter} {dst}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "MonitorTable":
        start: int | None = None
        raw_nodes: dict[int, MonitorNode] = {}
        pending_edges: list[tuple[int, str, int]] = []
        pending_verdicts: list[tuple[int, str]] = []
        seen_header = False
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if line == "[monitor]":
                seen_header = True
                continue
            if not seen_header:
                raise ParseError("monitor file must start with [monitor]", lineno)
            tokens = line.split()
            try:
                if tokens[0] == "start" and len(tokens) == 2:
                    start = int(tokens[1])
                elif tokens[0] == "node" and len(tokens) == 6 and tokens[2] == "pair" and tokens[4] == "skip":
                    s_name, q_name = tokens[3].split(",", 1)
                    raw_nodes[int(tokens[1])] = MonitorNode(
                        pair=(s_name, q_name), skip=int(tokens[5]), edges={}, verdict=None
                    )
                elif tokens[0] == "edge" and len(tokens) == 4:
                    pending_edges.append((int(tokens[1]), tokens[2], int(tokens[3])))
                elif tokens[0] == "verdict" and len(tokens) == 3 and tokens[2] in ("yes", "no"):
                    pending_verdicts.append((int(tokens[1]), tokens[2]))
                else:
                    raise ValueError("unrecognized directive")
            except (ValueError, IndexError) as exc:
                raise ParseError(f"bad monitor line: {exc}", lineno) from None
        if start is None:
            raise ValidationError("monitor file lacks a start node")
        if sorted(raw_nodes) != list(range(len(raw_nodes))):
            raise ValidationError("monitor node ids must be dense from 0")
        nodes = [raw_nodes[i] for i in range(len(raw_nodes))]
        for src, letter, dst in pending_edges:
            if src >= len(nodes) or dst >= len(nodes):
                raise ValidationError("monitor edge references an unknown node")
            nodes[src].edges[letter] = dst
        for i, verdict in pending_verdicts:
            if i >= len(nodes):
                raise ValidationError("monitor verdict references an unknown node")
            nodes[i].verdict = verdict
        for node in nodes:
            if node.verdict is not None and node.edges:
                raise ValidationError("verdict nodes cannot have successors")
        return cls(start=start, nodes=nodes)


class NonHiddenAnalyzer:
    """Language equivalence, settledness, cras, and monitor compilation.

    Pure after construction; one instance amortizes the equivalence table,
    cras values, and matrix powers across queries for a single product.
    """

    def __init__(self, product: ProductMc):
        targets = product.mc.non_hidden_targets()
        if targets is None:
            raise NotNonHiddenError("this analysis requires a non-hidden chain")
        self.product = product
        self.targets = targets
        self.pair_class = classify_pairs(product)
        self.observed = _observed_dfa(product, self.pair_class)
        self.equiv = _moore_partition(self.observed, product.n_letters)
        self._cras_pair: dict[int, int | float] = {}
        self._unsettled_witness: dict[int, bool] = {}
        self._power_cache: _PowerCache | None = None
        self._denominator: int | None = None
        self._letter_ints: list[list[list[int]]] | None = None
        self._skip_expansion: dict[int, list[frozenset]] = {}

    # -- settledness and confusion ----------------------------------------

    def is_settled(self, belief: Iterable[int]) -> bool:
        return self.equiv.settled(belief)

    def is_confused(self, belief: frozenset) -> bool:
        """A belief is confused iff one more observed letter can unsettle it."""
        nfa = self.product.nfa
        for a in range(self.product.n_letters):
            if not self.equiv.settled(nfa.step(belief, a)):
                return True
        return False

    # -- cras ----------------------------------------------------------------

    def _in_witness_set(self, node: int) -> bool:
        """Membership in U: some shared letter leads the two pairs apart."""
        cached = self._unsettled_witness.get(node)
        if cached is None:
            n = self.product.n_pairs
            p1, p2 = divmod(node, n)
            cached = False
            for a in range(self.product.n_letters):
                t1 = self.observed.trans[p1][a]
                t2 = self.observed.trans[p2][a]
                if t1 is not None and t2 is not None and not self.equiv.equivalent(t1, t2):
                    cached = True
                    break
            self._unsettled_witness[node] = cached
        return cached

    def cras(self, belief: frozenset) -> int | float:
        """Largest number of skips after which the belief stays unconfused.

        Returns -1 when the belief is confused already and ``math.inf`` when
        no amount of procrastination can confuse it.  Computed by breadth
        first search over pairs of pairs: a node (p1, p2) steps to every
        (p1', p2') contained in the union of the two skip-successor sets, and
        the belief after k skips is confused exactly when a length-k path
        from some pair of members reaches the witness set U.
        """
        n = self.product.n_pairs
        skip_succ = self.product.nfa.skip_succ
        members = sorted(belief)
        frontier = [p1 * n + p2 for p1 in members for p2 in members]
        seen = set(frontier)
        distance = 0
        while frontier:
            if any(self._in_witness_set(node) for node in frontier):
                result = distance - 1
                bound = (self.product.n_states * self.product.n_dfa) ** 2
                assert result < bound, "finite cras must stay below (|S||Q|)^2"
                return result
            next_frontier = []
            for node in frontier:
                p1, p2 = divmod(node, n)
                union = sorted(set(skip_succ[p1]) | set(skip_succ[p2]))
                for q1 in union:
                    base = q1 * n
                    for q2 in union:
                        nxt = base + q2
                        if nxt not in seen:
                            seen.add(nxt)
                            next_frontier.append(nxt)
            frontier = next_frontier
            distance += 1
        return math.inf

    def cras_pair(self, p: int) -> int | float:
        value = self._cras_pair.get(p)
        if value is None:
            value = self.cras(frozenset({p}))
            self._cras_pair[p] = value
        return value

    def skip_count(self, p: int, K: int | float) -> int | float:
        return min(K, self.cras_pair(p))

    # -- beliefs after skipping -------------------------------------------

    def belief_after_skips(self, p: int, k: int) -> frozenset:
        """step({p}, skip^k), with cycle detection so huge k stays cheap."""
        trail = self._skip_expansion.setdefault(p, [frozenset({p})])
        seen_at = {b: j for j, b in enumerate(trail)}
        while len(trail) <= k:
            nxt = self.product.nfa.step(trail[-1], SKIP)
            if nxt in seen_at:
                start = seen_at[nxt]
                period = len(trail) - start
                return trail[start + (k - start) % period]
            seen_at[nxt] = len(trail)
            trail.append(nxt)
        return trail[k]

    # -- monitor compilation -------------------------------------------------

    def compile_monitor(self, K: int | float) -> MonitorTable:
        """Compile the procrastination policy with skip bound K into a table.

        K may be ``math.inf`` for cost analysis, but emission is refused if
        any reachable non-deciding node would need an unbounded skip count.
        """
        product = self.product
        nfa = product.nfa
        ids: dict[int, int] = {}
        order: list[int] = []

        def intern(p: int) -> int:
            i = ids.get(p)
            if i is None:
                i = len(order)
                ids[p] = i
                order.append(p)
            return i

        intern(product.initial_pair)
        nodes: list[MonitorNode] = []
        cursor = 0
        while cursor < len(order):
            p = order[cursor]
            cls = self.pair_class[p]
            if cls is not PairClass.UNDECIDED:
                verdict = "yes" if cls is PairClass.POSITIVE else "no"
                nodes.append(MonitorNode(product.pair_name(p), 0, {}, verdict))
                cursor += 1
                continue
            c = self.cras_pair(p)
            if K == math.inf and c == math.inf:
                s_name, q_name = product.pair_name(p)
                raise CapabilityError(
                    f"cannot emit an execution table with K=inf: node ({s_name},{q_name}) "
                    "tolerates unboundedly many skips"
                )
            k = int(min(K, c))
            belief = self.belief_after_skips(p, k)
            edges: dict[str, int] = {}
            for a in range(product.n_letters):
                observed = nfa.step(belief, a)
                if not observed:
                    continue
                assert self.equiv.settled(observed), "observation after cras-many skips must settle"
                edges[product.mc.alphabet[a]] = intern(min(observed))
            nodes.append(MonitorNode(product.pair_name(p), k, edges, None))
            cursor += 1
        return MonitorTable(start=0, nodes=nodes)

    def monitor_class_count(self, table: MonitorTable) -> int:
        """Monitor size measured in language-equivalence classes."""
        mc_idx = self.product.mc.state_index
        dfa_idx = self.product.dfa.state_index
        classes = {
            self.equiv.class_of[self.product.pair_index(mc_idx[s], dfa_idx[q])]
            for s, q in (node.pair for node in table.nodes)
        }
        return len(classes)

    # -- procrastination chain ----------------------------------------------

    def _integer_matrices(self) -> tuple[int, list[list[list[int]]], _PowerCache]:
        if self._power_cache is None:
            product = self.product
            n = product.n_pairs
            denom = 1
            for a in range(product.n_letters):
                for p in range(n):
                    for _, prob in product.rows[a][p]:
                        denom = math.lcm(denom, prob.denominator)
            letter_ints = []
            for a in range(product.n_letters):
                mat = [[0] * n for _ in range(n)]
                for p in range(n):
                    for dst, prob in product.rows[a][p]:
                        mat[p][dst] = int(prob * denom)
                letter_ints.append(mat)
            skip_mat = [[sum(mat[p][t] for mat in letter_ints) for t in range(n)] for p in range(n)]
            self._denominator = denom
            self._letter_ints = letter_ints
            self._power_cache = _PowerCache(skip_mat)
        return self._denominator, self._letter_ints, self._power_cache

    def procrastination_row(self, p: int, k: int) -> dict[int, dict[int, Fraction]]:
        """Letter-split distribution after k skips and one observation."""
        denom, letter_ints, powers = self._integer_matrices()
        power_row = powers.get(k)[p]
        scale = denom ** (k + 1)
        row: dict[int, dict[int, Fraction]] = {}
        for a, mat in enumerate(letter_ints):
            targets: dict[int, Fraction] = {}
            for mid, weight in enumerate(power_row):
                if not weight:
                    continue
                for dst, entry in enumerate(mat[mid]):
                    if entry:
                        targets[dst] = targets.get(dst, ZERO) + Fraction(weight * entry, scale)
            if targets:
                row[a] = targets
        return row

    def procrastination_mc(self, K: int | float) -> ProcrastinationMc:
        product = self.product
        dollar = product.n_letters
        one = Fraction(1)
        skip_counts: list[int | None] = []
        rows: list[dict[int, dict[int, Fraction]]] = []
        limit_pairs = set()
        for p in range(product.n_pairs):
            if self.pair_class[p] is not PairClass.UNDECIDED:
                skip_counts.append(None)
                rows.append({dollar: {p: one}})
                continue
            c = self.cras_pair(p)
            if K == math.inf and c == math.inf:
                # Closed-form limit case: one observation decides, the cost
                # system pins this row's value directly.
                skip_counts.append(None)
                rows.append({dollar: {p: one}})
                limit_pairs.add(p)
                continue
            k = int(min(K, c))
            skip_counts.append(k)
            rows.append(self.procrastination_row(p, k))
        return ProcrastinationMc(
            product=product,
            K=K,
            skip_counts=skip_counts,
            rows=rows,
            limit_pairs=frozenset(limit_pairs),
            dollar=dollar,
        )


def confused_nonhidden(product: ProductMc, belief: frozenset) -> bool:
    """One-shot settledness-based confusion check (non-hidden chains only)."""
    return NonHiddenAnalyzer(product).is_confused(belief)


def compute_cras(product: ProductMc, belief: frozenset) -> int | float:
    """One-shot cras computation (non-hidden chains only)."""
    return NonHiddenAnalyzer(product).cras(belief)


def compile_monitor(product: ProductMc, K: int | float) -> MonitorTable:
    """Compile the procrastination monitor for a non-hidden chain."""
    return NonHiddenAnalyzer(product).compile_monitor(K)


def build_procrastination_mc(product: ProductMc, K: int | float) -> ProcrastinationMc:
    """Build the observation chain of the procrastination policy."""
    return NonHiddenAnalyzer(product).procrastination_mc(K)
