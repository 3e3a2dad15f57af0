"""Synchronized output regulation of nonlinear multi-agent systems over switching digraphs."""

__version__ = "0.1.0"

from .agents import (
    AgentModel,
    Exosystem,
    GainSet,
    Linearization,
    RegulatorSolution,
    builtin_agent,
    builtin_exosystem,
    is_hurwitz,
    linearize,
    regulator_residual,
    verify_gains,
)
from .consensus import (
    SyncCertificate,
    TransitionMatrix,
    check_sync_condition,
    consensus_rate_over_horizon,
    contraction_rate,
    estimate_lyapunov_exponent,
    matrix_exponential,
    transition_matrix,
)
from .errors import ConfigError, DivergenceError, SyncRegError
from .graph import (
    Digraph,
    LeaderAugmentedGraph,
    SwitchingSchedule,
    adjacency_matrix,
    augment_with_leader,
    has_spanning_tree,
    laplacian,
    union_graph,
    verify_bounded_interconnectivity,
)
from .io import parse_scenario, read_csv, write_csv
from .simulator import (
    Scenario,
    SimResult,
    fit_exponential_rate,
    pairwise_sync_error,
    rk4_step,
    simulate,
    tracking_errors,
)

__all__ = [
    "adjacency_matrix",
    "AgentModel",
    "augment_with_leader",
    "builtin_agent",
    "builtin_exosystem",
    "check_sync_condition",
    "ConfigError",
    "consensus_rate_over_horizon",
    "contraction_rate",
    "Digraph",
    "DivergenceError",
    "estimate_lyapunov_exponent",
    "Exosystem",
    "fit_exponential_rate",
    "GainSet",
    "has_spanning_tree",
    "is_hurwitz",
    "laplacian",
    "LeaderAugmentedGraph",
    "Linearization",
    "linearize",
    "matrix_exponential",
    "pairwise_sync_error",
    "parse_scenario",
    "read_csv",
    "regulator_residual",
    "RegulatorSolution",
    "rk4_step",
    "Scenario",
    "SimResult",
    "simulate",
    "SwitchingSchedule",
    "SyncCertificate",
    "SyncRegError",
    "tracking_errors",
    "transition_matrix",
    "TransitionMatrix",
    "union_graph",
    "verify_bounded_interconnectivity",
    "verify_gains",
    "write_csv",
]
