"""Exact expected-cost analysis of observation policies.

All quantities are exact rationals (``math.inf`` marks divergence).  Hitting
probabilities and expected hitting times are computed by restricting the
chain to the relevant node set and solving the standard linear systems with
exact Gaussian elimination; no iteration, no floating point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

from .analysis import DEFAULT_NODE_CAP, BeliefAnalyzer, PairClass
from .linalg import solve_linear
from .model import NotNonHiddenError, ProductMc, ValidationError, ZERO, ONE
from .nonhidden import NonHiddenAnalyzer

#: Skip bounds analyzed by default in cost reports.
DEFAULT_K_SWEEP = (0, 1, 2, 4, 8, 16, 32, 64)

Rows = Sequence[Mapping[int, Fraction]]


def _forward_closure(rows: Rows, start: int, absorbing: set[int]) -> list[int]:
    seen = {start}
    frontier = [start]
    while frontier:
        node = frontier.pop()
        if node in absorbing:
            continue
        for dst in rows[node]:
            if dst not in seen:
                seen.add(dst)
                frontier.append(dst)
    return sorted(seen)


def _co_reachable(rows: Rows, nodes: Iterable[int], targets: set[int]) -> set[int]:
    nodes = list(nodes)
    radj: dict[int, list[int]] = {node: [] for node in nodes}
    for node in nodes:
        if node in targets:
            continue
        for dst in rows[node]:
            if dst in radj:
                radj[dst].append(node)
    seen = {node for node in nodes if node in targets}
    frontier = list(seen)
    while frontier:
        node = frontier.pop()
        for prev in radj[node]:
            if prev not in seen:
                seen.add(prev)
                frontier.append(prev)
    return seen


def hitting_probability(rows: Rows, targets: set[int], start: int) -> Fraction:
    """Probability of ever entering ``targets`` from ``start``, exactly."""
    if start in targets:
        return ONE
    reachable = _forward_closure(rows, start, targets)
    can_hit = _co_reachable(rows, reachable, targets & set(reachable))
    if start not in can_hit:
        return ZERO
    unknown = [node for node in reachable if node in can_hit and node not in targets]
    index = {node: i for i, node in enumerate(unknown)}
    matrix = []
    rhs = []
    for node in unknown:
        row = [ZERO] * len(unknown)
        row[index[node]] = ONE
        b = ZERO
        for dst, prob in rows[node].items():
            if dst in targets:
                b += prob
            elif dst in index:
                row[index[dst]] -= prob
        matrix.append(row)
        rhs.append(b)
    solution = solve_linear(matrix, rhs)
    return solution[index[start]]


def expected_hitting_time(rows: Rows, targets: set[int], start: int) -> Fraction | float:
    """Expected number of steps to enter ``targets``; ``inf`` if not a.s. hit."""
    if start in targets:
        return ZERO
    reachable = _forward_closure(rows, start, targets)
    can_hit = _co_reachable(rows, reachable, targets & set(reachable))
    if any(node not in can_hit for node in reachable):
        return math.inf
    unknown = [node for node in reachable if node not in targets]
    index = {node: i for i, node in enumerate(unknown)}
    matrix = []
    for node in unknown:
        row = [ZERO] * len(unknown)
        row[index[node]] = ONE
        for dst, prob in rows[node].items():
            if dst in index:
                row[index[dst]] -= prob
        matrix.append(row)
    solution = solve_linear(matrix, [ONE] * len(unknown))
    return solution[index[start]]


# -- observation chains ------------------------------------------------------


def _pair_chain(product: ProductMc) -> list[dict[int, Fraction]]:
    return [product.combined_row(p) for p in range(product.n_pairs)]


def _belief_chain(
    product: ProductMc, analyzer: BeliefAnalyzer, absorb_very_confused: bool
) -> tuple[list[dict[int, Fraction]], set[int], int]:
    """The chain of (state, belief) nodes seen by a fully observing monitor."""
    graph = analyzer.belief_graph(product.initial_belief)
    rows: list[dict[int, Fraction]] = []
    for i, (s, _) in enumerate(graph.nodes):
        row: dict[int, Fraction] = {}
        for a, dst in graph.edges[i]:
            t = graph.nodes[dst][0]
            row[dst] = row.get(dst, ZERO) + product.mc.matrices[a][s][t]
        rows.append(row)
    targets = {i for i, mark in enumerate(graph.deciding) if mark}
    if absorb_very_confused:
        analyzer.ensure_very_confused_marks(graph)
        targets.update(i for i, mark in enumerate(graph.very_confused) if mark)
    return rows, targets, graph.roots[0]


def decision_probability(product: ProductMc, cap: int = DEFAULT_NODE_CAP) -> Fraction:
    """Probability that the always-observing policy eventually decides."""
    analyzer = BeliefAnalyzer(product, cap=cap)
    if product.mc.non_hidden_targets() is not None:
        deciding = {
            p for p, cls in enumerate(analyzer.pair_class) if cls is not PairClass.UNDECIDED
        }
        return hitting_probability(_pair_chain(product), deciding, product.initial_pair)
    rows, targets, source = _belief_chain(product, analyzer, absorb_very_confused=False)
    return hitting_probability(rows, targets, source)


def expected_smart_cost(product: ProductMc, cap: int = DEFAULT_NODE_CAP) -> Fraction | float:
    """Expected cost of observing until the prefix is deciding or very confused.

    Infinite exactly when the empty prefix is not finitary.
    """
    analyzer = BeliefAnalyzer(product, cap=cap)
    if not analyzer.cinf_is_finite():
        return math.inf
    if product.mc.non_hidden_targets() is not None:
        # Fully observed non-hidden runs track singleton beliefs, which are
        # deciding exactly when the current pair is; none are very confused.
        deciding = {
            p for p, cls in enumerate(analyzer.pair_class) if cls is not PairClass.UNDECIDED
        }
        return expected_hitting_time(_pair_chain(product), deciding, product.initial_pair)
    rows, targets, source = _belief_chain(product, analyzer, absorb_very_confused=True)
    return expected_hitting_time(rows, targets, source)


# -- procrastination costs ----------------------------------------------------


def compute_cinf(product: ProductMc, analyzer: NonHiddenAnalyzer | None = None) -> Fraction:
    """The optimal expected observation cost over all feasible policies.

    Solves the limit system of the procrastination chain: deciding pairs cost
    nothing, pairs tolerating unboundedly many skips cost exactly one more
    observation, and the rest cost one plus the expected cost after skipping
    as long as safely possible.
    """
    if analyzer is None:
        analyzer = NonHiddenAnalyzer(product)
    pro = analyzer.procrastination_mc(math.inf)
    fixed: dict[int, Fraction] = {}
    for p in range(product.n_pairs):
        if analyzer.pair_class[p] is not PairClass.UNDECIDED:
            fixed[p] = ZERO
        elif p in pro.limit_pairs:
            fixed[p] = ONE
    rows = [pro.combined_row(p) for p in range(product.n_pairs)]
    reachable = _forward_closure(rows, product.initial_pair, set(fixed))
    unknown = [p for p in reachable if p not in fixed]
    if product.initial_pair in fixed:
        return fixed[product.initial_pair]
    index = {p: i for i, p in enumerate(unknown)}
    matrix = []
    rhs = []
    for p in unknown:
        row = [ZERO] * len(unknown)
        row[index[p]] = ONE
        b = ONE
        for dst, prob in rows[p].items():
            if dst in index:
                row[index[dst]] -= prob
            else:
                b += prob * fixed[dst]
        matrix.append(row)
        rhs.append(b)
    solution = solve_linear(matrix, rhs)
    return solution[index[product.initial_pair]]


def expected_pro_cost(
    product: ProductMc, K: int, analyzer: NonHiddenAnalyzer | None = None
) -> Fraction:
    """Expected number of observations the K-procrastination policy makes."""
    if K == math.inf or not isinstance(K, int):
        raise ValidationError("expected_pro_cost needs a finite integer skip bound")
    if K < 0:
        raise ValidationError("the skip bound must be non-negative")
    if analyzer is None:
        analyzer = NonHiddenAnalyzer(product)
    pro = analyzer.procrastination_mc(K)
    deciding = {
        p for p in range(product.n_pairs) if analyzer.pair_class[p] is not PairClass.UNDECIDED
    }
    rows = [pro.combined_row(p) for p in range(product.n_pairs)]
    cost = expected_hitting_time(rows, deciding, product.initial_pair)
    assert cost != math.inf, "procrastination policies decide almost surely"
    return cost


@dataclass
class CostReport:
    """Exact cost summary of one non-hidden model."""

    expected_smart: Fraction | float
    cinf: Fraction | float
    expected_pro: dict[int, Fraction]
    decision_probability: Fraction
    ratio: Fraction | None


def cost_report(
    product: ProductMc,
    k_sweep: Sequence[int] = DEFAULT_K_SWEEP,
    cap: int = DEFAULT_NODE_CAP,
) -> CostReport:
    """Full cost analysis; raises NotNonHiddenError for hidden chains."""
    analyzer = NonHiddenAnalyzer(product)
    smart = expected_smart_cost(product, cap=cap)
    cinf = compute_cinf(product, analyzer)
    pro = {k: expected_pro_cost(product, k, analyzer) for k in k_sweep}
    prob = decision_probability(product, cap=cap)
    ratio = None
    if smart != math.inf and smart != 0:
        ratio = cinf / smart
    return CostReport(
        expected_smart=smart,
        cinf=cinf,
        expected_pro=pro,
        decision_probability=prob,
        ratio=ratio,
    )


# -- rendering ----------------------------------------------------------------


def frac_str(value: Fraction | float) -> str:
    if value == math.inf:
        return "inf"
    value = Fraction(value)
    if value.denominator == 1:
        return str(value.numerator)
    return f"{value.numerator}/{value.denominator}"


def decimal_str(value: Fraction | float, digits: int = 12) -> str:
    if value == math.inf:
        return "inf"
    return f"{float(value):.{digits}g}"


def report_items(report: CostReport) -> list[tuple[str, Fraction | float]]:
    items: list[tuple[str, Fraction | float]] = [
        ("expected_smart", report.expected_smart),
        ("cinf", report.cinf),
    ]
    for k in sorted(report.expected_pro):
        items.append((f"pro.K{k}", report.expected_pro[k]))
    items.append(("decision_probability", report.decision_probability))
    if report.ratio is not None:
        items.append(("ratio", report.ratio))
    return items


def report_text(report: CostReport) -> str:
    lines = [
        f"{key} {frac_str(value)} ({decimal_str(value)})"
        for key, value in report_items(report)
    ]
    return "\n".join(lines) + "\n"


def report_json_dict(report: CostReport) -> dict[str, str]:
    return {key: frac_str(value) for key, value in report_items(report)}


@dataclass
class BatchRow:
    """One row of the batch ratio table (one corpus of monitors)."""

    name: str
    count: int
    avg_size: float
    max_size: int
    ratios: list[Fraction]

    @property
    def median(self) -> float:
        values = sorted(float(r) for r in self.ratios)
        n = len(values)
        mid = n // 2
        return values[mid] if n % 2 else (values[mid - 1] + values[mid]) / 2

    @property
    def geometric_mean(self) -> float:
        logs = [math.log(float(r)) for r in self.ratios]
        return math.exp(sum(logs) / len(logs))


def batch_table(rows: Sequence[BatchRow]) -> str:
    """Render batch results with the Med / GAvg ratio columns."""
    header = f"{'Name':<12} {'Count':>5} {'Avg-Size':>8} {'Max-Size':>8} {'Med':>6} {'GAvg':>6}"
    lines = [header, "-" * len(header)]
    for row in rows:
        lines.append(
            f"{row.name:<12} {row.count:>5} {row.avg_size:>8.1f} {row.max_size:>8} "
            f"{row.median:>6.2f} {row.geometric_mean:>6.2f}"
        )
    return "\n".join(lines) + "\n"
