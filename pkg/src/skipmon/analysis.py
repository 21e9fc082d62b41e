"""Qualitative classification of product pairs, beliefs, and observation prefixes.

Everything here is decided graph-qualitatively: a probability-1 reachability
statement over a finite chain holds exactly when no reachable node has the
target unreachable, so no numeric probabilities are needed.  The belief-space
searches are memoized subset constructions guarded by an explicit node cap.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence

from .model import (
    SKIP,
    ProductMc,
    SizeLimitError,
    ValidationError,
)

#: Default ceiling on explored (state, belief) nodes.
DEFAULT_NODE_CAP = 2_000_000


class PairClass(Enum):
    """Verdict of a product pair: does the run surely (not) satisfy the property?"""

    NEGATIVE = "negative"
    POSITIVE = "positive"
    UNDECIDED = "undecided"


def _reverse_closure(radj: list[list[int]], seeds: Iterable[int]) -> set[int]:
    seen = set(seeds)
    frontier = list(seen)
    while frontier:
        node = frontier.pop()
        for prev in radj[node]:
            if prev not in seen:
                seen.add(prev)
                frontier.append(prev)
    return seen


def classify_pairs(product: ProductMc) -> list[PairClass]:
    """Classify every product pair as negatively/positively deciding or neither.

    A pair is negatively deciding iff no accepting pair is reachable from it,
    and positively deciding iff no negatively deciding pair is reachable.
    """
    nfa = product.nfa
    n = product.n_pairs
    radj: list[list[int]] = [[] for _ in range(n)]
    for p in range(n):
        for dst in nfa.skip_succ[p]:
            radj[dst].append(p)
    accepting = [
        p for p in range(n) if product.pair_state(p)[1] == product.dfa.accepting
    ]
    reach_acc = _reverse_closure(radj, accepting)
    negative = [p for p in range(n) if p not in reach_acc]
    reach_neg = _reverse_closure(radj, negative)
    out = []
    for p in range(n):
        if p not in reach_acc:
            out.append(PairClass.NEGATIVE)
        elif p not in reach_neg:
            out.append(PairClass.POSITIVE)
        else:
            out.append(PairClass.UNDECIDED)
    return out


@dataclass
class BeliefClass:
    """Flags of one observation prefix (equivalently, of its belief)."""

    enabled: bool
    positively_deciding: bool
    negatively_deciding: bool
    confused: bool
    very_confused: bool
    finitary: bool

    @property
    def deciding(self) -> bool:
        return self.positively_deciding or self.negatively_deciding


@dataclass
class BeliefGraph:
    """Reachable (chain state, belief) nodes under full observation.

    Edges follow the chain's support: from (s, B) there is an ``a``-edge to
    (s', step(B, a)) whenever the chain can emit ``a`` moving s to s'.  Node
    marks record whether the node's belief is deciding and (once computed)
    very confused.
    """

    nodes: list[tuple[int, frozenset]]
    edges: list[list[tuple[int, int]]]
    roots: list[int]
    deciding: list[bool]
    very_confused: list[bool] | None = None
    index: dict[tuple[int, frozenset], int] = field(default_factory=dict)

    def co_reachable(self, targets: Iterable[int]) -> set[int]:
        """Nodes from which some target node is reachable."""
        radj: list[list[int]] = [[] for _ in self.nodes]
        for src, out in enumerate(self.edges):
            for _, dst in out:
                radj[dst].append(src)
        return _reverse_closure(radj, targets)


class BeliefAnalyzer:
    """Memoizing facade for the belief-level predicates of one product.

    Instances are cheap; memo tables live per instance so independent models
    can be analyzed in parallel.
    """

    def __init__(self, product: ProductMc, cap: int = DEFAULT_NODE_CAP):
        self.product = product
        self.cap = cap
        self.nfa = product.nfa
        self.pair_class = classify_pairs(product)
        self._mc_succ = [
            [product.mc.successors(s, a) for a in range(product.n_letters)]
            for s in range(product.n_states)
        ]
        self._vc_cache: dict[frozenset, bool] = {}
        self._graph_cache: dict[frozenset, BeliefGraph] = {}

    # -- belief-level decisions ------------------------------------------

    def belief_decision(self, belief: frozenset) -> PairClass | None:
        """POSITIVE/NEGATIVE when every member pair agrees, else None.

        The empty belief returns None here; prefix-level classification
        handles the vacuous case explicitly.
        """
        if not belief:
            return None
        classes = {self.pair_class[p] for p in belief}
        if classes == {PairClass.POSITIVE}:
            return PairClass.POSITIVE
        if classes == {PairClass.NEGATIVE}:
            return PairClass.NEGATIVE
        return None

    def belief_deciding(self, belief: frozenset) -> bool:
        return self.belief_decision(belief) is not None

    # -- very confused ----------------------------------------------------

    def is_very_confused(self, belief: frozenset) -> bool:
        """True iff no nonempty deciding belief is letter-reachable from here."""
        cached = self._vc_cache.get(belief)
        if cached is not None:
            return cached
        seen = {belief}
        frontier = [belief]
        found = False
        while frontier and not found:
            current = frontier.pop()
            if current and self.belief_deciding(current):
                found = True
                break
            for a in range(self.product.n_letters):
                nxt = self.nfa.step(current, a)
                if nxt not in seen:
                    if len(seen) >= self.cap:
                        raise SizeLimitError(
                            f"belief search exceeded the cap of {self.cap} nodes"
                        )
                    seen.add(nxt)
                    frontier.append(nxt)
        if found:
            self._vc_cache[belief] = False
            return False
        # The explored set is closed, so every belief in it is very confused.
        for b in seen:
            self._vc_cache[b] = True
        return True

    # -- the (state, belief) graph ---------------------------------------

    def belief_graph(self, belief: frozenset) -> BeliefGraph:
        graph = self._graph_cache.get(belief)
        if graph is None:
            roots = [(s, belief) for s in sorted({self.product.pair_state(p)[0] for p in belief})]
            graph = build_belief_graph(self.product, roots, cap=self.cap, analyzer=self)
            self._graph_cache[belief] = graph
        return graph

    def is_confused(self, belief: frozenset) -> bool:
        """True iff full observation fails to decide with positive probability."""
        if not belief:
            return False
        graph = self.belief_graph(belief)
        targets = [i for i, mark in enumerate(graph.deciding) if mark]
        can_decide = graph.co_reachable(targets)
        return len(can_decide) < len(graph.nodes)

    def is_finitary(self, belief: frozenset) -> bool:
        """True iff a deciding or very confused belief is almost surely reached."""
        if not belief:
            return True
        graph = self.belief_graph(belief)
        self.ensure_very_confused_marks(graph)
        targets = [
            i
            for i in range(len(graph.nodes))
            if graph.deciding[i] or graph.very_confused[i]
        ]
        settled = graph.co_reachable(targets)
        return len(settled) == len(graph.nodes)

    def ensure_very_confused_marks(self, graph: BeliefGraph) -> None:
        if graph.very_confused is None:
            graph.very_confused = [
                self.is_very_confused(b) for _, b in graph.nodes
            ]

    # -- prefix level -------------------------------------------------------

    def classify_prefix(self, observations: Sequence[int]) -> BeliefClass:
        """Fold the observations from the initial belief and classify the result.

        A non-enabled prefix is vacuously deciding in both polarities, very
        confused, finitary, and not confused, matching the definitions read
        literally on the empty belief.
        """
        for o in observations:
            if o != SKIP and not 0 <= o < self.product.n_letters:
                raise ValidationError(f"observation index {o} outside the alphabet")
        belief = self.nfa.step_word(self.product.initial_belief, observations)
        if belief:
            decision = self.belief_decision(belief)
            pos = decision is PairClass.POSITIVE
            neg = decision is PairClass.NEGATIVE
        else:
            pos = neg = True
        return BeliefClass(
            enabled=bool(belief),
            positively_deciding=pos,
            negatively_deciding=neg,
            confused=self.is_confused(belief),
            very_confused=self.is_very_confused(belief),
            finitary=self.is_finitary(belief),
        )

    def diagnoser_exists(self) -> bool:
        return not self.is_confused(self.product.initial_belief)

    def cinf_is_finite(self) -> bool:
        return self.is_finitary(self.product.initial_belief)


def build_belief_graph(
    product: ProductMc,
    roots: Sequence[tuple[int, frozenset]],
    cap: int = DEFAULT_NODE_CAP,
    analyzer: BeliefAnalyzer | None = None,
) -> BeliefGraph:
    """Forward exploration of (state, belief) nodes with memoization.

    Raises SizeLimitError if more than ``cap`` nodes would be created.
    """
    if analyzer is None:
        analyzer = BeliefAnalyzer(product, cap=cap)
    nfa = product.nfa
    mc = product.mc
    nodes: list[tuple[int, frozenset]] = []
    index: dict[tuple[int, frozenset], int] = {}
    edges: list[list[tuple[int, int]]] = []

    def intern(node: tuple[int, frozenset]) -> int:
        i = index.get(node)
        if i is None:
            if len(nodes) >= cap:
                raise SizeLimitError(f"belief graph exceeded the cap of {cap} nodes")
            i = len(nodes)
            index[node] = i
            nodes.append(node)
            edges.append([])
        return i

    root_ids = [intern(node) for node in roots]
    cursor = 0
    step_cache: dict[tuple[frozenset, int], frozenset] = {}
    while cursor < len(nodes):
        s, belief = nodes[cursor]
        for a in range(product.n_letters):
            succ_states = analyzer._mc_succ[s][a] if analyzer else mc.successors(s, a)
            if not succ_states:
                continue
            key = (belief, a)
            nxt = step_cache.get(key)
            if nxt is None:
                nxt = nfa.step(belief, a)
                step_cache[key] = nxt
            for t in succ_states:
                edges[cursor].append((a, intern((t, nxt))))
        cursor += 1
    deciding = [analyzer.belief_deciding(b) for _, b in nodes]
    return BeliefGraph(nodes=nodes, edges=edges, roots=root_ids, deciding=deciding, index=index)


def diagnoser_exists(product: ProductMc, cap: int = DEFAULT_NODE_CAP) -> bool:
    """A policy deciding almost surely exists iff the empty prefix is unconfused."""
    return BeliefAnalyzer(product, cap=cap).diagnoser_exists()


def cinf_is_finite(product: ProductMc, cap: int = DEFAULT_NODE_CAP) -> bool:
    """The optimal expected observation cost is finite iff ε is finitary."""
    return BeliefAnalyzer(product, cap=cap).cinf_is_finite()


def belief_graph_dot(product: ProductMc, graph: BeliefGraph) -> str:
    """Render a belief graph in DOT form for debugging."""
    lines = ["digraph beliefs {", "  rankdir=LR;", "  node [shape=box];"]
    for i, (s, belief) in enumerate(graph.nodes):
        pairs = ",".join(
            "({},{})".format(*product.pair_name(p)) for p in sorted(belief)
        )
        label = f"{product.mc.states[s]} | {{{pairs}}}"
        attrs = [f'label="{label}"']
        if graph.deciding[i]:
            attrs.append("peripheries=2")
        if graph.very_confused is not None and graph.very_confused[i]:
            attrs.append("style=dashed")
        if i in graph.roots:
            attrs.append("penwidth=2")
        lines.append(f"  n{i} [{', '.join(attrs)}];")
    for src, out in enumerate(graph.edges):
        for a, dst in out:
            lines.append(f'  n{src} -> n{dst} [label="{product.mc.alphabet[a]}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"
