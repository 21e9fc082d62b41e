"""Random model generation and built-in property automata.

Transition probabilities are sampled from a symmetric Dirichlet distribution
(per-coordinate Gamma draws from a seeded generator) and then rounded to
rationals with denominator 2**32; the rounding residual goes to the largest
coordinate so every row stays exactly stochastic.  Generation is a pure
function of its spec, so repeated calls produce byte-identical files.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from fractions import Fraction

from .model import Dfa, Mc, ParseError, ValidationError, ZERO, build_dfa, format_model

#: Denominator used when rounding sampled probabilities to rationals.
PROB_DENOMINATOR = 1 << 32


def letter_names(count: int) -> list[str]:
    names = []
    for i in range(count):
        if i < 26:
            names.append(chr(ord("a") + i))
        else:
            names.append(f"a{i}")
    return names


@dataclass
class GenSpec:
    """Shape parameters for a random chain."""

    states: int
    letters: int
    out_degree: int
    alpha: float = 1.0
    seed: int = 0
    non_hidden: bool = False

    def __post_init__(self):
        if self.states < 1 or self.letters < 1 or self.out_degree < 1:
            raise ValidationError("states, letters, and out-degree must be positive")
        if self.alpha <= 0:
            raise ValidationError("the Dirichlet concentration must be positive")


def _dirichlet_row(rng: random.Random, alpha: float, k: int) -> list[Fraction]:
    """A length-k stochastic vector with denominator PROB_DENOMINATOR."""
    weights = [rng.gammavariate(alpha, 1.0) for _ in range(k)]
    total = sum(weights)
    if total <= 0:
        weights = [1.0] * k
        total = float(k)
    scaled = [int(w / total * PROB_DENOMINATOR) for w in weights]
    residual = PROB_DENOMINATOR - sum(scaled)
    scaled[max(range(k), key=lambda i: (weights[i], -i))] += residual
    return [Fraction(x, PROB_DENOMINATOR) for x in scaled]


def generate_mc(spec: GenSpec) -> Mc:
    """A random chain with bounded out-degree and Dirichlet-sampled rows.

    With ``non_hidden`` set there is one letter per state and every edge is
    labelled with its target's letter, which forces the non-hidden shape.
    """
    rng = random.Random(spec.seed)
    n = spec.states
    if spec.non_hidden:
        letters = letter_names(n)
    else:
        letters = letter_names(spec.letters)
    states = [f"s{i}" for i in range(n)]
    degree_cap = min(spec.out_degree, n)
    matrices = [[[ZERO] * n for _ in range(n)] for _ in letters]
    for s in range(n):
        degree = rng.randint(1, degree_cap)
        successors = sorted(rng.sample(range(n), degree))
        probs = _dirichlet_row(rng, spec.alpha, degree)
        for t, p in zip(successors, probs):
            if not p:
                continue
            a = t if spec.non_hidden else rng.randrange(len(letters))
            matrices[a][s][t] += p
    # Letters that never occur are invisible to the file format; drop them so
    # the serialized model round-trips with the same alphabet.
    used = [a for a, matrix in enumerate(matrices) if any(any(row) for row in matrix)]
    letters = [letters[a] for a in used]
    matrices = [matrices[a] for a in used]
    return Mc(states, letters, matrices, 0)


def builtin_property(name: str, alphabet: list[str]) -> Dfa:
    """A named property automaton over the given alphabet.

    * ``iterator``: fails when two ``next`` events occur without an
      intervening ``hasNext``; all other letters are neutral.
    * ``reach:<letter>``: some occurrence of the letter.
    * ``parity:<letter>:<m>``: the letter occurs at a position divisible
      by m (positions counted from zero).
    """
    if name == "iterator":
        if "next" not in alphabet:
            raise ValidationError("the iterator property needs a 'next' letter")
        states = ["ok", "armed", "fail"]
        transitions: dict[tuple[str, str], str] = {}
        for letter in alphabet:
            if letter == "next":
                transitions[("ok", letter)] = "armed"
                transitions[("armed", letter)] = "fail"
            elif letter == "hasNext":
                transitions[("ok", letter)] = "ok"
                transitions[("armed", letter)] = "ok"
            else:
                transitions[("ok", letter)] = "ok"
                transitions[("armed", letter)] = "armed"
            transitions[("fail", letter)] = "fail"
        return build_dfa(states, alphabet, transitions, "ok", ["fail"])
    if name.startswith("reach:"):
        target = name.split(":", 1)[1]
        if target not in alphabet:
            raise ValidationError(f"reach property letter {target!r} not in the alphabet")
        states = ["q0", "acc"]
        transitions = {}
        for letter in alphabet:
            transitions[("q0", letter)] = "acc" if letter == target else "q0"
            transitions[("acc", letter)] = "acc"
        return build_dfa(states, alphabet, transitions, "q0", ["acc"])
    if name.startswith("parity:"):
        try:
            _, target, modulus_text = name.split(":", 2)
            modulus = int(modulus_text)
        except ValueError:
            raise ValidationError("parity property must look like parity:<letter>:<m>") from None
        if modulus < 1:
            raise ValidationError("parity modulus must be positive")
        if target not in alphabet:
            raise ValidationError(f"parity property letter {target!r} not in the alphabet")
        states = [f"c{i}" for i in range(modulus)] + ["acc"]
        transitions = {}
        for i in range(modulus):
            for letter in alphabet:
                if letter == target and i == 0:
                    transitions[(f"c{i}", letter)] = "acc"
                else:
                    transitions[(f"c{i}", letter)] = f"c{(i + 1) % modulus}"
        for letter in alphabet:
            transitions[("acc", letter)] = "acc"
        return build_dfa(states, alphabet, transitions, "c0", ["acc"])
    raise ValidationError(f"unknown builtin property {name!r}")


def default_property(spec: GenSpec, alphabet: list[str]) -> str:
    """Deterministic default property for a generated chain."""
    rng = random.Random(f"{spec.seed}:property")
    return f"reach:{rng.choice(alphabet)}"


def generate_model(spec: GenSpec, property_name: str | None = None) -> str:
    """A complete random model file (chain plus property automaton)."""
    mc = generate_mc(spec)
    if property_name is None:
        property_name = default_property(spec, mc.alphabet)
    dfa = builtin_property(property_name, mc.alphabet)
    return format_model(mc, dfa)


@dataclass
class FlowgraphSpec:
    """A directed event-labelled graph used as the skeleton of a chain.

    Vertices without outgoing edges get a self-loop labelled with a fresh
    quiescent letter so every row can be made stochastic.
    """

    vertices: list[str]
    edges: list[tuple[str, str, str]]
    entry: str


def parse_flowgraph(text: str) -> FlowgraphSpec:
    """Parse a flowgraph file: `entry <v>`, `vertex <v>`, `edge <src> <event> <dst>`."""
    vertices: list[str] = []
    seen: set[str] = set()
    edges: list[tuple[str, str, str]] = []
    entry: str | None = None

    def add_vertex(name: str):
        if name not in seen:
            seen.add(name)
            vertices.append(name)

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        if tokens[0] == "entry" and len(tokens) == 2:
            if entry is not None:
                raise ParseError("duplicate entry declaration", lineno)
            entry = tokens[1]
            add_vertex(entry)
        elif tokens[0] == "vertex" and len(tokens) == 2:
            add_vertex(tokens[1])
        elif tokens[0] == "edge" and len(tokens) == 4:
            src, event, dst = tokens[1], tokens[2], tokens[3]
            add_vertex(src)
            add_vertex(dst)
            edges.append((src, event, dst))
        else:
            raise ParseError(f"unrecognized flowgraph line {line!r}", lineno)
    if entry is None:
        raise ValidationError("flowgraph needs an entry vertex")
    return FlowgraphSpec(vertices=vertices, edges=edges, entry=entry)


def flowgraph_mc(flowgraph: FlowgraphSpec, alpha: float, seed: int) -> Mc:
    """Attach Dirichlet-sampled probabilities to a flowgraph skeleton."""
    rng = random.Random(seed)
    out_edges: dict[str, list[tuple[str, str]]] = {v: [] for v in flowgraph.vertices}
    letters: list[str] = []
    letter_seen: set[str] = set()
    for src, event, dst in flowgraph.edges:
        out_edges[src].append((event, dst))
        if event not in letter_seen:
            letter_seen.add(event)
            letters.append(event)
    sinks = [v for v in flowgraph.vertices if not out_edges[v]]
    if sinks:
        quiet = "quiet"
        while quiet in letter_seen:
            quiet += "_"
        letters.append(quiet)
        for v in sinks:
            out_edges[v].append((quiet, v))
    states = list(flowgraph.vertices)
    sidx = {v: i for i, v in enumerate(states)}
    lidx = {letter: i for i, letter in enumerate(letters)}
    n = len(states)
    matrices = [[[ZERO] * n for _ in range(n)] for _ in letters]
    for v in states:
        targets = out_edges[v]
        probs = _dirichlet_row(rng, alpha, len(targets))
        for (event, dst), p in zip(targets, probs):
            matrices[lidx[event]][sidx[v]][sidx[dst]] += p
    return Mc(states, letters, matrices, sidx[flowgraph.entry])


def flowgraph_model(
    flowgraph: FlowgraphSpec, alpha: float, seed: int, property_name: str
) -> str:
    """A model file from a flowgraph skeleton and a builtin property."""
    mc = flowgraph_mc(flowgraph, alpha, seed)
    dfa = builtin_property(property_name, mc.alphabet)
    return format_model(mc, dfa)
