# Analytical engine and Monte Carlo oracle
from .errors import (
    ConfigError,
    ConvergenceError,
    DomainError,
    EngineError,
    ModeMismatchError,
    ParameterError,
    QuadratureError,
)
from .params import (
    FfUpperLimit,
    MgfMode,
    ProbMode,
    SystemParams,
    decision_threshold,
    fraunhofer_distance,
    near_field_limit,
    regime_priors,
    validate,
    with_decision_threshold,
    with_fraunhofer,
)
from .capacity import scheduled_rate, service_rate, true_capacity
from .ranging import p_false_far, p_false_near, sample_estimate, trunc_gauss_cdf
from .regime_markov import StateId, state_distribution, state_prob_cond, transition_matrix
from .ec_engine import (
    EcResult,
    direct_effective_capacity,
    effective_capacity,
    effective_capacity_spectral,
    mgf_state,
    mgf_state_cond,
)
from .montecarlo import McConfig, McEstimate, estimate_ec, simulate_slot
from .crlb_toa import WaveformSpec, crlb_distance_variance, crlb_toa_variance, simulate_toa_estimation

__all__ = [
    "ConfigError",
    "ConvergenceError",
    "DomainError",
    "EngineError",
    "ModeMismatchError",
    "ParameterError",
    "QuadratureError",
    "FfUpperLimit",
    "MgfMode",
    "ProbMode",
    "SystemParams",
    "decision_threshold",
    "fraunhofer_distance",
    "near_field_limit",
    "regime_priors",
    "validate",
    "with_decision_threshold",
    "with_fraunhofer",
    "scheduled_rate",
    "service_rate",
    "true_capacity",
    "p_false_far",
    "p_false_near",
    "sample_estimate",
    "trunc_gauss_cdf",
    "StateId",
    "state_distribution",
    "state_prob_cond",
    "transition_matrix",
    "EcResult",
    "direct_effective_capacity",
    "effective_capacity",
    "effective_capacity_spectral",
    "mgf_state",
    "mgf_state_cond",
    "McConfig",
    "McEstimate",
    "estimate_ec",
    "simulate_slot",
    "WaveformSpec",
    "crlb_distance_variance",
    "crlb_toa_variance",
    "simulate_toa_estimation",
]
