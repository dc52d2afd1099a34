"""Two-timescale Markov population models: averaged mean-field analysis,
bias-corrected steady-state estimates, stochastic simulation, and exact
small-instance oracles.

A model is declared as a catalog of transitions: each entry jumps the
slow state x by l/N, may retarget the fast state y, and fires at rate
N * alpha(x, y). The library computes the averaged drift, its fixed
point phi_inf, and a correction constant C_h per observable h such that
stationary expectations satisfy E[h] = h(phi_inf) + C_h/N + O(1/N^2).
"""

from __future__ import annotations

__version__ = "0.1.0"

from .errors import (
    ConfigError,
    FastChainError,
    MeanFieldError,
    ModelValidationError,
    OracleError,
    RefinementError,
    SimulationError,
    TwoscaleError,
)
from .fastchain import (
    FastChainAnalysis,
    analyze,
    build_kernel,
    deviation_matrix,
    solve_fast_poisson,
    stationary_distribution,
)
from .meanfield import (
    FixedPoint,
    Trajectory,
    average_drift,
    drift,
    drift_matrix,
    fixed_point,
    integrate,
)
from .model import (
    AffineRate,
    CsmaSpec,
    Transition,
    TwoTimescaleModel,
    affine_transition,
    build_csma,
    build_toy,
    enumerate_feasible_activations,
    load_model,
    model_from_descriptor,
    named_model,
    sample_states,
    validate,
)
from .oracle import (
    ExactStationary,
    FullChainIndex,
    build_full_chain,
    exact_expectation,
    exact_stationary,
)
from .refinement import (
    Observable,
    RefinementTerms,
    SIGN_TS,
    U_FACTOR,
    compute_O,
    compute_S,
    compute_T,
    compute_V,
    correction_vector,
    hessian_B,
    jacobian_A,
    q_bar,
    refined_estimate,
    refinement_constant,
    refinement_terms,
    solve_lyapunov,
    solve_sylvester,
)
from .simulator import (
    STATUS_ABSORBED,
    STATUS_ABSORBED_MEASURE,
    STATUS_BOX,
    STATUS_BUDGET,
    STATUS_NEGATIVE_RATE,
    STATUS_OK,
    EstimateWithCI,
    EventTrajectory,
    TransientEstimate,
    available_backends,
    backend_name,
    estimate_steady_state,
    estimate_steady_state_multi,
    estimate_transient_mean,
    seed_stream,
    set_backend,
    simulate_path,
)

__all__ = [
    "__version__",
    "TwoscaleError",
    "ModelValidationError",
    "FastChainError",
    "MeanFieldError",
    "RefinementError",
    "SimulationError",
    "OracleError",
    "ConfigError",
    "TwoTimescaleModel",
    "Transition",
    "AffineRate",
    "CsmaSpec",
    "affine_transition",
    "build_csma",
    "build_toy",
    "enumerate_feasible_activations",
    "named_model",
    "model_from_descriptor",
    "load_model",
    "sample_states",
    "validate",
    "FastChainAnalysis",
    "build_kernel",
    "stationary_distribution",
    "deviation_matrix",
    "solve_fast_poisson",
    "analyze",
    "Trajectory",
    "FixedPoint",
    "drift",
    "drift_matrix",
    "average_drift",
    "integrate",
    "fixed_point",
    "Observable",
    "RefinementTerms",
    "SIGN_TS",
    "U_FACTOR",
    "jacobian_A",
    "hessian_B",
    "q_bar",
    "solve_lyapunov",
    "solve_sylvester",
    "compute_V",
    "compute_O",
    "compute_T",
    "compute_S",
    "refinement_terms",
    "refinement_constant",
    "correction_vector",
    "refined_estimate",
    "STATUS_OK",
    "STATUS_ABSORBED",
    "STATUS_ABSORBED_MEASURE",
    "STATUS_NEGATIVE_RATE",
    "STATUS_BOX",
    "STATUS_BUDGET",
    "EventTrajectory",
    "EstimateWithCI",
    "TransientEstimate",
    "available_backends",
    "backend_name",
    "set_backend",
    "seed_stream",
    "simulate_path",
    "estimate_transient_mean",
    "estimate_steady_state",
    "estimate_steady_state_multi",
    "FullChainIndex",
    "ExactStationary",
    "build_full_chain",
    "exact_stationary",
    "exact_expectation",
]
