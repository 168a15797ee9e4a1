"""Cooperative neighbour-scale estimation and output synchronization.

Design and verification toolkit for heterogeneous linear multi-agent systems
that only measure relative outputs: graph analysis, LMI synthesis of local
estimators, regulator design for output synchronization, and simulation with
empirical checks of the guaranteed performance bounds.
"""

__version__ = "0.1.0"

from .errors import (
    CoopestError,
    DimensionMismatch,
    Infeasible,
    InfeasibleAtUpperBound,
    IsolatedAgent,
    NoSolution,
    NoStabilizingSolution,
    NonFiniteState,
    NotPositiveDefinite,
    NumericalFailure,
    ScenarioError,
    SingularP,
)
from .graph import (
    DirectedGraph,
    SccDecomposition,
    adjacency_matrix,
    degrees,
    incidence_matrix,
    is_strongly_connected,
    laplacian,
    scc_decompose,
)
from .model import (
    AgentModel,
    GlobalSystem,
    LocalStack,
    Network,
    check_iscc_detectability,
    global_system,
    local_stack,
    local_stacks,
    pbh_detectable,
)
from .regulation import (
    ExosystemSpec,
    RegulatorDesign,
    design_regulator,
    estimator_weight,
    feedback_gain,
    performance_constants,
    solve_francis,
    solve_game_riccati,
)
from .sim import (
    DisturbanceSpec,
    SimConfig,
    Trace,
    dissipation_slack,
    disturbance_sample,
    evaluate_estimation_inequality,
    evaluate_sync_inequality,
    lyapunov_decay_ratio,
    simulate_closed_loop,
    simulate_estimation,
)
from .synthesis import (
    EstimatorBank,
    SynthesisParams,
    assemble_coupled_lmi,
    centralized_baseline,
    design_at_gamma,
    minimize_centralized_gamma,
    minimize_gamma,
    recover_gains,
    solve_feasibility,
)
