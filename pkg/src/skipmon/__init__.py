"""Selective-monitor synthesis and exact cost analysis for labelled Markov chains."""

from .model import (
    SKIP,
    Belief,
    BeliefNfa,
    CapabilityError,
    Dfa,
    Mc,
    ModelError,
    NotNonHiddenError,
    ParseError,
    ProductMc,
    SizeLimitError,
    ValidationError,
    belief_step,
    build_dfa,
    compose,
    format_model,
    is_non_hidden,
    load_model,
)
from .analysis import (
    DEFAULT_NODE_CAP,
    BeliefAnalyzer,
    BeliefClass,
    BeliefGraph,
    PairClass,
    belief_graph_dot,
    build_belief_graph,
    cinf_is_finite,
    classify_pairs,
    diagnoser_exists,
)
from .nonhidden import (
    EquivTable,
    MonitorNode,
    MonitorTable,
    NonHiddenAnalyzer,
    ObservedDfa,
    ProcrastinationMc,
    build_procrastination_mc,
    compile_monitor,
    compute_cras,
    confused_nonhidden,
    is_settled,
    language_equivalence,
)
from .costs import (
    DEFAULT_K_SWEEP,
    CostReport,
    compute_cinf,
    cost_report,
    decision_probability,
    expected_pro_cost,
    expected_smart_cost,
)
from .simulate import (
    PolicyMismatchError,
    PolicyResult,
    RunTrace,
    Sampler,
    SimReport,
    run_policy,
    sample_run,
    simulate,
)
from .generate import (
    FlowgraphSpec,
    GenSpec,
    builtin_property,
    flowgraph_mc,
    flowgraph_model,
    generate_mc,
    generate_model,
    parse_flowgraph,
)

__all__ = [name for name in dir() if not name.startswith("_")]
