"""Monte-Carlo execution of observation policies on sampled runs.

Sampling draws a 64-bit dyadic fraction per step and compares it against
exact cumulative thresholds, so trajectories follow the model's rational
probabilities without floating-point bias and are reproducible from the
seed.  Per-trial seeds are derived from the master seed by hashing, so any
single trial can be replayed in isolation.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

from .analysis import BeliefAnalyzer, PairClass
from .model import SKIP, ModelError, ProductMc, ValidationError
from .nonhidden import MonitorTable


class PolicyMismatchError(ModelError):
    """A compiled monitor saw a letter it has no edge for: wrong model."""


@dataclass
class RunTrace:
    """A sampled run: emitted letters plus the hidden product trajectory.

    ``pairs[i]`` is the product pair after ``i`` steps, so ``pairs[0]`` is
    the initial pair and ``len(pairs) == len(letters) + 1``.
    """

    letters: list[int]
    pairs: list[int]
    seed: int


_RANGE = 1 << 64


def derive_seed(master: int, counter: int) -> int:
    digest = hashlib.sha256(f"{master}:{counter}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


class Sampler:
    """Reusable exact sampler for one product chain."""

    def __init__(self, product: ProductMc):
        self.product = product
        self._tables: list[tuple[int, list[tuple[int, int, int]]]] = []
        for p in range(product.n_pairs):
            outcomes = []
            for a in range(product.n_letters):
                for dst, prob in product.rows[a][p]:
                    outcomes.append((a, dst, prob))
            denom = math.lcm(*(prob.denominator for _, _, prob in outcomes)) if outcomes else 1
            cumulative = 0
            table = []
            for a, dst, prob in outcomes:
                cumulative += int(prob * denom)
                table.append((a, dst, cumulative << 64))
            self._tables.append((denom, table))

    def sample(self, seed: int, max_steps: int) -> RunTrace:
        if max_steps < 1:
            raise ValidationError("max_steps must be at least 1")
        letters: list[int] = []
        pairs = [self.product.initial_pair]
        current = self.product.initial_pair
        for step in range(max_steps):
            denom, table = self._tables[current]
            r = derive_seed(seed, step) * denom
            chosen = None
            for a, dst, threshold in table:
                if r < threshold:
                    chosen = (a, dst)
                    break
            assert chosen is not None, "cumulative thresholds must cover [0,1)"
            letters.append(chosen[0])
            current = chosen[1]
            pairs.append(current)
        return RunTrace(letters=letters, pairs=pairs, seed=seed)


def sample_run(product: ProductMc, seed: int, max_steps: int) -> RunTrace:
    """Sample one run of at most ``max_steps`` letters, deterministically."""
    return Sampler(product).sample(seed, max_steps)


@dataclass
class PolicyResult:
    policy: str
    decided: bool
    verdict: str | None
    observations: int
    stop_index: int | None
    observed_prefix: list[int] = field(default_factory=list)


def _verdict_of(analyzer: BeliefAnalyzer, belief: frozenset) -> str | None:
    decision = analyzer.belief_decision(belief)
    if decision is PairClass.POSITIVE:
        return "yes"
    if decision is PairClass.NEGATIVE:
        return "no"
    return None


def run_policy(
    product: ProductMc,
    trace: RunTrace,
    policy: str | MonitorTable,
    analyzer: BeliefAnalyzer | None = None,
) -> PolicyResult:
    """Execute one policy over a sampled trace.

    ``policy`` is "seeall", "smart", or a compiled monitor table.  The cost
    is the number of observations made up to and including the deciding one;
    runs that outlive the trace are reported as undecided.
    """
    if analyzer is None:
        analyzer = BeliefAnalyzer(product)
    if isinstance(policy, MonitorTable):
        return _run_monitor(product, trace, policy)
    if policy == "seeall":
        return _run_observing(product, trace, analyzer, stop_when_very_confused=False)
    if policy == "smart":
        return _run_observing(product, trace, analyzer, stop_when_very_confused=True)
    raise ValidationError(f"unknown policy {policy!r}")


def _run_observing(
    product: ProductMc,
    trace: RunTrace,
    analyzer: BeliefAnalyzer,
    stop_when_very_confused: bool,
) -> PolicyResult:
    name = "smart" if stop_when_very_confused else "seeall"
    belief = product.initial_belief
    observed: list[int] = []
    verdict = _verdict_of(analyzer, belief)
    if verdict is not None:
        return PolicyResult(name, True, verdict, 0, 0, observed)
    if stop_when_very_confused and analyzer.is_very_confused(belief):
        return PolicyResult(name, False, None, 0, 0, observed)
    for i, a in enumerate(trace.letters):
        belief = product.nfa.step(belief, a)
        observed.append(a)
        verdict = _verdict_of(analyzer, belief)
        if verdict is not None:
            return PolicyResult(name, True, verdict, i + 1, i + 1, observed)
        if stop_when_very_confused and analyzer.is_very_confused(belief):
            return PolicyResult(name, False, None, i + 1, i + 1, observed)
    return PolicyResult(name, False, None, len(trace.letters), None, observed)


def _run_monitor(product: ProductMc, trace: RunTrace, table: MonitorTable) -> PolicyResult:
    letter_index = product.mc.letter_index
    observed: list[int] = []
    observations = 0
    position = 0
    node = table.nodes[table.start]
    while True:
        if node.verdict is not None:
            return PolicyResult("monitor", True, node.verdict, observations, position, observed)
        observe_at = position + node.skip
        if observe_at >= len(trace.letters):
            return PolicyResult("monitor", False, None, observations, None, observed)
        observed.extend([SKIP] * node.skip)
        letter = trace.letters[observe_at]
        observed.append(letter)
        observations += 1
        position = observe_at + 1
        name = product.mc.alphabet[letter]
        nxt = node.edges.get(name)
        if nxt is None:
            raise PolicyMismatchError(
                f"monitor has no edge for letter {name!r}; model and monitor do not match"
            )
        node = table.nodes[nxt]


@dataclass
class PolicyStats:
    name: str
    decided: int = 0
    undecided: int = 0
    yes: int = 0
    no: int = 0
    incorrect: int = 0
    cost_sum: int = 0
    cost_squares: int = 0

    @property
    def mean_cost(self) -> float | None:
        if not self.decided:
            return None
        return self.cost_sum / self.decided

    @property
    def stddev(self) -> float | None:
        if self.decided < 2:
            return 0.0 if self.decided else None
        n = self.decided
        variance = (self.cost_squares - self.cost_sum**2 / n) / (n - 1)
        return math.sqrt(max(variance, 0.0))

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "mean_cost": self.mean_cost,
            "stddev": self.stddev,
            "undecided": self.undecided,
            "decided": self.decided,
            "verdicts": {"yes": self.yes, "no": self.no},
            "incorrect": self.incorrect,
        }


@dataclass
class SimReport:
    trials: int
    seed: int
    policies: list[PolicyStats]

    def to_dict(self) -> dict:
        return {
            "trials": self.trials,
            "seed": self.seed,
            "policies": [stats.to_dict() for stats in self.policies],
        }


def simulate(
    product: ProductMc,
    policies: Sequence[tuple[str, str | MonitorTable]],
    trials: int,
    seed: int,
    max_steps: int,
) -> SimReport:
    """Run every policy over ``trials`` independently sampled traces.

    A decided run is counted as incorrect when its verdict contradicts the
    ground truth: a "yes" needs the hidden pair at the stop to not be
    negatively deciding and the produced observation prefix to be positively
    deciding (symmetrically for "no").
    """
    if trials < 1:
        raise ValidationError("trials must be at least 1")
    sampler = Sampler(product)
    analyzer = BeliefAnalyzer(product)
    stats = [PolicyStats(name) for name, _ in policies]
    for trial in range(trials):
        trace = sampler.sample(derive_seed(seed, trial), max_steps)
        for (name, policy), entry in zip(policies, stats):
            result = run_policy(product, trace, policy, analyzer)
            if not result.decided:
                entry.undecided += 1
                continue
            entry.decided += 1
            entry.cost_sum += result.observations
            entry.cost_squares += result.observations**2
            if result.verdict == "yes":
                entry.yes += 1
            else:
                entry.no += 1
            if not _verdict_consistent(analyzer, trace, result):
                entry.incorrect += 1
    return SimReport(trials=trials, seed=seed, policies=stats)


def _verdict_consistent(
    analyzer: BeliefAnalyzer, trace: RunTrace, result: PolicyResult
) -> bool:
    hidden = trace.pairs[result.stop_index]
    hidden_class = analyzer.pair_class[hidden]
    belief = analyzer.nfa.step_word(
        analyzer.product.initial_belief, result.observed_prefix
    )
    prefix_decision = analyzer.belief_decision(belief)
    if result.verdict == "yes":
        return hidden_class is not PairClass.NEGATIVE and prefix_decision is PairClass.POSITIVE
    return hidden_class is not PairClass.POSITIVE and prefix_decision is PairClass.NEGATIVE
