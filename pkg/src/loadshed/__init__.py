"""Distributed priority-based load shedding on discrete load sets.

Library plus CLI simulator: cumulative criticality functions and their
Lipschitz surrogates, centralized verification oracles, time-varying
communication graphs with doubly-stochastic mixing, the synchronous
distributed threshold protocol with dynamic min-consensus, and a
generalized distributed root finder with executable assumption checks.
"""

from .criticality import (
    Ccf,
    ConvexCombiner,
    CriticalLoad,
    Load,
    Region,
    SurrogateCcf,
    build_ccf,
    combine_criticality,
    eval_ccf,
    eval_surrogate,
    local_zeta,
    min_gap,
    resolve_loads,
)
from .oracle import (
    ContinuousSolution,
    InfeasibleError,
    SheddingSolution,
    brute_force_min_set,
    continuous_ccf_eval,
    continuous_solution,
    exact_z_hat,
    exact_z_star,
    greedy_shed_set,
    z_star_from_z_hat,
)
from .netgraph import (
    ConnectivityReport,
    PeriodicSchedule,
    RandomSchedule,
    StaticSchedule,
    check_window_connectivity,
    metropolis_weights,
    threshold_graph,
)
from .protocol import (
    ExactSplit,
    NoisySplit,
    ProtocolInstance,
    RunTrace,
    StepSchedule,
    TraceEstimator,
    dmc_round,
    p_values,
    run_protocol,
    shed_decision,
    x_update_round,
    zeta_update,
)
from .rootfind import (
    AssumptionCertificate,
    RootRun,
    TimeVaryingField,
    aux_update_round,
    run_to_root,
)
from .scenario import (
    ScenarioConfig,
    ScenarioError,
    SummaryReport,
    dump_scenario,
    emit_trace,
    generate_scenario,
    load_scenario,
    run_continuous,
    run_scenario,
)

__version__ = "0.1.0"
