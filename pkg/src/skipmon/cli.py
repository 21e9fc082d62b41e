"""Command-line interface.

Exit codes: 0 success, 1 usage, 2 parse/validation, 3 analysis cap
exceeded, 4 capability (e.g. cost analysis of a hidden chain).
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

from . import costs, generate, simulate
from .analysis import DEFAULT_NODE_CAP, BeliefAnalyzer, PairClass, belief_graph_dot
from .model import (
    SKIP,
    CapabilityError,
    ModelError,
    NotNonHiddenError,
    ParseError,
    ProductMc,
    SizeLimitError,
    ValidationError,
    compose,
    load_model,
)
from .nonhidden import MonitorTable, NonHiddenAnalyzer

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INVALID = 2
EXIT_CAP = 3
EXIT_CAPABILITY = 4


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _load_product(path: str) -> ProductMc:
    text = Path(path).read_text(encoding="utf-8")
    mc, dfa = load_model(text)
    return compose(mc, dfa)


def _parse_prefix(product: ProductMc, text: str) -> list[int]:
    if not text:
        return []
    observations = []
    for token in text.split(","):
        token = token.strip()
        if token == "_":
            observations.append(SKIP)
        elif token in product.mc.letter_index:
            observations.append(product.mc.letter_index[token])
        else:
            raise ValidationError(f"unknown letter {token!r} in prefix")
    return observations


def _parse_k(text: str) -> int | float:
    if text == "inf":
        return math.inf
    try:
        value = int(text)
    except ValueError:
        raise ValidationError(f"skip bound must be an integer or 'inf', got {text!r}") from None
    if value < 0:
        raise ValidationError("skip bound must be non-negative")
    return value


def _emit(payload: dict, as_json: bool, lines: list[str]) -> None:
    if as_json:
        print(json.dumps(payload, indent=2, sort_keys=True))
    else:
        print("\n".join(lines))


def _cmd_validate(args) -> int:
    product = _load_product(args.file)
    mc, dfa = product.mc, product.dfa
    non_hidden = mc.non_hidden_targets() is not None
    payload = {
        "states": len(mc.states),
        "letters": len(mc.alphabet),
        "dfa_states": len(dfa.states),
        "non_hidden": non_hidden,
    }
    lines = [
        f"states {len(mc.states)}",
        f"letters {len(mc.alphabet)}",
        f"dfa_states {len(dfa.states)}",
        f"non_hidden {'yes' if non_hidden else 'no'}",
    ]
    _emit(payload, args.json, lines)
    return EXIT_OK


def _cmd_analyze(args) -> int:
    product = _load_product(args.file)
    analyzer = BeliefAnalyzer(product, cap=args.cap)
    non_hidden = product.mc.non_hidden_targets() is not None
    diagnosable = analyzer.diagnoser_exists()
    finite = analyzer.cinf_is_finite()
    counts = {"positive": 0, "negative": 0, "undecided": 0}
    for cls in analyzer.pair_class:
        counts[cls.value] += 1
    if args.dot:
        graph = analyzer.belief_graph(product.initial_belief)
        analyzer.ensure_very_confused_marks(graph)
        Path(args.dot).write_text(belief_graph_dot(product, graph), encoding="utf-8")
    payload = {
        "non_hidden": non_hidden,
        "diagnosable": diagnosable,
        "cinf_finite": finite,
        "pair_classes": counts,
    }
    lines = [
        f"non_hidden {'yes' if non_hidden else 'no'}",
        f"diagnosable {'yes' if diagnosable else 'no'}",
        f"cinf_finite {'yes' if finite else 'no'}",
        f"pair_classes positive={counts['positive']} negative={counts['negative']} "
        f"undecided={counts['undecided']}",
    ]
    _emit(payload, args.json, lines)
    return EXIT_OK


def _cmd_classify(args) -> int:
    product = _load_product(args.file)
    analyzer = BeliefAnalyzer(product, cap=args.cap)
    prefix = _parse_prefix(product, args.prefix)
    result = analyzer.classify_prefix(prefix)
    payload = {
        "enabled": result.enabled,
        "positively_deciding": result.positively_deciding,
        "negatively_deciding": result.negatively_deciding,
        "confused": result.confused,
        "very_confused": result.very_confused,
        "finitary": result.finitary,
    }
    lines = [f"{key} {'yes' if value else 'no'}" for key, value in payload.items()]
    _emit(payload, args.json, lines)
    return EXIT_OK


def _cmd_compile(args) -> int:
    product = _load_product(args.file)
    analyzer = NonHiddenAnalyzer(product)
    table = analyzer.compile_monitor(_parse_k(args.K))
    text = table.to_text()
    if args.output:
        Path(args.output).write_text(text, encoding="utf-8")
        print(
            f"wrote {len(table.nodes)} nodes "
            f"({analyzer.monitor_class_count(table)} language classes) to {args.output}"
        )
    else:
        print(text, end="")
    return EXIT_OK


def _cmd_cost(args) -> int:
    product = _load_product(args.file)
    if args.k_sweep:
        try:
            sweep = tuple(int(tok) for tok in args.k_sweep.split(","))
        except ValueError:
            raise ValidationError("--k-sweep takes a comma-separated list of integers") from None
    else:
        sweep = costs.DEFAULT_K_SWEEP
    report = costs.cost_report(product, k_sweep=sweep, cap=args.cap)
    if args.json:
        print(json.dumps(costs.report_json_dict(report), indent=2, sort_keys=True))
    else:
        print(costs.report_text(report), end="")
    return EXIT_OK


def _cmd_simulate(args) -> int:
    product = _load_product(args.file)
    policies: list[tuple[str, str | MonitorTable]] = []
    for name in args.policy.split(","):
        name = name.strip()
        if name in ("seeall", "smart"):
            policies.append((name, name))
        elif name == "pro":
            if args.K is None:
                raise _UsageError("--policy pro requires --K")
            table = NonHiddenAnalyzer(product).compile_monitor(_parse_k(args.K))
            policies.append((f"pro(K={args.K})", table))
        else:
            raise ValidationError(f"unknown policy {name!r}")
    report = simulate.simulate(product, policies, args.trials, args.seed, args.max_steps)
    if args.json:
        print(json.dumps(report.to_dict(), indent=2, sort_keys=True))
    else:
        lines = [f"trials {report.trials}", f"seed {report.seed}"]
        for stats in report.policies:
            mean = "n/a" if stats.mean_cost is None else f"{stats.mean_cost:.6f}"
            std = "n/a" if stats.stddev is None else f"{stats.stddev:.6f}"
            lines.append(
                f"{stats.name}: decided {stats.decided} undecided {stats.undecided} "
                f"yes {stats.yes} no {stats.no} incorrect {stats.incorrect} "
                f"mean_cost {mean} stddev {std}"
            )
        print("\n".join(lines))
    return EXIT_OK


def _cmd_gen(args) -> int:
    if args.flowgraph:
        flowgraph = generate.parse_flowgraph(Path(args.flowgraph).read_text(encoding="utf-8"))
        property_name = args.property or "iterator"
        text = generate.flowgraph_model(flowgraph, args.alpha, args.seed, property_name)
    else:
        spec = generate.GenSpec(
            states=args.states,
            letters=args.letters,
            out_degree=args.out_degree,
            alpha=args.alpha,
            seed=args.seed,
            non_hidden=args.non_hidden,
        )
        text = generate.generate_model(spec, args.property)
    if args.output:
        Path(args.output).write_text(text, encoding="utf-8")
        print(f"wrote model to {args.output}")
    else:
        print(text, end="")
    return EXIT_OK


def _cmd_batch(args) -> int:
    ratios = []
    sizes = []
    produced = 0
    attempt = 0
    while produced < args.count:
        spec = generate.GenSpec(
            states=args.states,
            letters=args.states,
            out_degree=args.out_degree,
            alpha=args.alpha,
            seed=args.seed + attempt,
            non_hidden=True,
        )
        attempt += 1
        text = generate.generate_model(spec)
        mc, dfa = load_model(text)
        product = compose(mc, dfa)
        analyzer = NonHiddenAnalyzer(product)
        if analyzer.pair_class[product.initial_pair] is not PairClass.UNDECIDED:
            continue  # trivial monitor, decided before any observation
        report = costs.cost_report(product, k_sweep=(), cap=args.cap)
        ratios.append(report.ratio)
        table = analyzer.compile_monitor(64)
        sizes.append(analyzer.monitor_class_count(table))
        produced += 1
    row = costs.BatchRow(
        name="generated",
        count=len(ratios),
        avg_size=sum(sizes) / len(sizes),
        max_size=max(sizes),
        ratios=ratios,
    )
    if args.json:
        payload = {
            "count": row.count,
            "avg_size": row.avg_size,
            "max_size": row.max_size,
            "median": row.median,
            "geometric_mean": row.geometric_mean,
            "ratios": [costs.frac_str(r) for r in ratios],
        }
        print(json.dumps(payload, indent=2, sort_keys=True))
    else:
        print(costs.batch_table([row]), end="")
    return EXIT_OK


def build_parser() -> _Parser:
    parser = _Parser(prog="skipmon", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def with_common(p, cap=True):
        p.add_argument("--json", action="store_true", help="machine-readable output")
        if cap:
            p.add_argument("--cap", type=int, default=DEFAULT_NODE_CAP,
                           help="belief-space node cap")

    p = sub.add_parser("validate", help="parse and validate a model file")
    p.add_argument("file")
    with_common(p, cap=False)
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("analyze", help="qualitative analysis of a model")
    p.add_argument("file")
    p.add_argument("--dot", help="write the belief graph in DOT form")
    with_common(p)
    p.set_defaults(func=_cmd_analyze)

    p = sub.add_parser("classify", help="classify an observation prefix")
    p.add_argument("file")
    p.add_argument("--prefix", required=True,
                   help="comma-separated letters, '_' for a skipped observation")
    with_common(p)
    p.set_defaults(func=_cmd_classify)

    p = sub.add_parser("compile", help="compile a procrastination monitor")
    p.add_argument("file")
    p.add_argument("-K", required=True, help="skip bound (integer or 'inf')")
    p.add_argument("-o", "--output", help="write the monitor table here")
    p.set_defaults(func=_cmd_compile)

    p = sub.add_parser("cost", help="exact expected-cost report (non-hidden only)")
    p.add_argument("file")
    p.add_argument("--k-sweep", help="comma-separated skip bounds to analyze")
    with_common(p)
    p.set_defaults(func=_cmd_cost)

    p = sub.add_parser("simulate", help="Monte-Carlo policy simulation")
    p.add_argument("file")
    p.add_argument("--policy", required=True,
                   help="comma-separated subset of seeall,smart,pro")
    p.add_argument("--K", help="skip bound for the pro policy")
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-steps", type=int, default=200)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("gen", help="generate a random model file")
    p.add_argument("--states", type=int, default=5)
    p.add_argument("--letters", type=int, default=3)
    p.add_argument("--out-degree", type=int, default=3)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--non-hidden", action="store_true")
    p.add_argument("--property", help="builtin property (iterator, reach:<a>, parity:<a>:<m>)")
    p.add_argument("--flowgraph", help="build the chain from this flowgraph file")
    p.add_argument("-o", "--output")
    p.set_defaults(func=_cmd_gen)

    p = sub.add_parser("batch", help="cost-ratio experiment over generated models")
    p.add_argument("--count", type=int, default=100)
    p.add_argument("--states", type=int, default=4)
    p.add_argument("--out-degree", type=int, default=3)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    with_common(p)
    p.set_defaults(func=_cmd_batch)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ParseError, ValidationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except SizeLimitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CAP
    except (CapabilityError, NotNonHiddenError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CAPABILITY
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except ModelError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
