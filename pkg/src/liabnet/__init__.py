"""Liability allocation and equilibrium analysis for cascading cancellations.

A shock at the source of a DAG triggers a cascade of contract
cancellations that traces out a source-to-sink path. This package models
those networks, computes liability allocations for the realized path under
a family of rules, solves the induced sequential game for its exact
subgame-perfect outcome set, property-checks the axioms the rules are
built on, and ships a Monte-Carlo comparison on layered supply networks.
"""

from .axioms import (
    AXIOMS,
    PROPERTIES,
    AxiomError,
    CheckReport,
    check_axiom,
    check_property,
    impossibility_scenario,
)
from .game import (
    GameError,
    HistoryCapExceeded,
    ProfileCapExceeded,
    RobustnessResult,
    SpeSolution,
    check_robust_efficiency,
    history_count,
    profile_count,
    spe_bruteforce,
    spe_outcomes,
    spe_solve,
)
from .graph import (
    Dag,
    EfficiencyResult,
    GraphError,
    GraphValidationError,
    Path,
    PathCapExceeded,
    ValidationReport,
    build_dag,
    continuation_costs,
    count_paths,
    efficient_paths,
    enumerate_paths,
    path_loss,
    reachable_subgraph,
    validate,
)
from .rules import (
    LiabilityVector,
    Rule,
    RuleSpec,
    RuleSpecError,
    apply_rule,
    fixed_rule,
    irreducible_extension,
    make_rule,
)
from .sim import (
    HourglassGraph,
    LayeredGraphSpec,
    SimConfig,
    SimError,
    SimStats,
    generate_hourglass,
    gini,
    run_simulation,
)
from .weights import (
    PathCountTables,
    WeightVector,
    WeightsError,
    core_check,
    path_count_tables,
    path_counting_value,
    shapley_bruteforce,
    wstar_dp,
    wstar_enumerate,
)

__version__ = "0.1.0"
