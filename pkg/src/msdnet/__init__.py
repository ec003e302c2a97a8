"""Distributed consensus optimization via mass-spring-damper dynamics.

The package minimizes a sum of per-node convex costs over a connected
undirected graph under a consensus constraint, in Euclidean or entropy
geometry. It provides the continuous-time dynamics, an explicit and an
implicit discrete update, three standard comparison algorithms, and a
harness that checks the averaged-gap convergence bounds along every run.
"""

from .baselines import (
    StochasticMatrix,
    dual_averaging_step,
    mirror_descent_step,
    mixing_matrix,
    projected_subgradient_step,
)
from .dynamics import (
    ContinuousTrajectory,
    SolverState,
    StepSchedule,
    initial_state,
    msd_explicit_step,
    msd_implicit_step,
    reset_average,
    simulate_continuous,
    step_size,
)
from .errors import CertificateError, ConfigError, ConvergenceError, DomainError
from .geometry import (
    EntropyMap,
    EuclideanMap,
    FreeSpace,
    MirrorMap,
    Simplex,
    bregman_prox,
    simplex_projection,
)
from .graphs import (
    BlockOperator,
    EdgeWeights,
    Graph,
    incidence_matrix,
    largest_eigenvalue,
    load_graph,
    max_step_ratio,
    random_connected_graph,
    save_graph,
    scaled_incidence,
    weighted_laplacian,
)
from .harness import (
    ALGORITHMS,
    AlgorithmRun,
    ExperimentConfig,
    ExperimentResult,
    RunRecord,
    benchmark_config,
    build_instance,
    emit,
    explicit_bound_rhs,
    implicit_bound_rhs,
    read_records,
    run,
    snapshot,
    write_records,
)
from .problems import (
    Certificate,
    Custom,
    Linear,
    ProblemInstance,
    Quadratic,
    centralized_optimum,
    disagreement,
    dual_certificate,
    lagrangian,
    lyapunov,
    max_edge_gap,
)
from .verify import CheckResult, run_checks

__version__ = "0.1.0"

__all__ = [
    "ALGORITHMS",
    "AlgorithmRun",
    "BlockOperator",
    "Certificate",
    "CertificateError",
    "CheckResult",
    "ConfigError",
    "ContinuousTrajectory",
    "ConvergenceError",
    "Custom",
    "DomainError",
    "EdgeWeights",
    "EntropyMap",
    "EuclideanMap",
    "ExperimentConfig",
    "ExperimentResult",
    "FreeSpace",
    "Graph",
    "Linear",
    "MirrorMap",
    "ProblemInstance",
    "Quadratic",
    "RunRecord",
    "Simplex",
    "SolverState",
    "StepSchedule",
    "StochasticMatrix",
    "benchmark_config",
    "bregman_prox",
    "build_instance",
    "centralized_optimum",
    "disagreement",
    "dual_averaging_step",
    "dual_certificate",
    "emit",
    "explicit_bound_rhs",
    "implicit_bound_rhs",
    "incidence_matrix",
    "initial_state",
    "lagrangian",
    "largest_eigenvalue",
    "load_graph",
    "lyapunov",
    "max_edge_gap",
    "max_step_ratio",
    "mirror_descent_step",
    "mixing_matrix",
    "msd_explicit_step",
    "msd_implicit_step",
    "projected_subgradient_step",
    "random_connected_graph",
    "read_records",
    "reset_average",
    "run",
    "run_checks",
    "save_graph",
    "scaled_incidence",
    "simplex_projection",
    "simulate_continuous",
    "snapshot",
    "step_size",
    "weighted_laplacian",
    "write_records",
]
