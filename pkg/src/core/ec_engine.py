"""Per-state MGFs of the service process and the effective capacity of the link.

Integrals over the estimate d_hat are taken in the standardized variable
t = (d_hat - d) / sigma_d and clipped to the configured Gaussian span.
"""

import logging
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from src.config import get_settings
from src.core.capacity import rate_crossings, scheduled_rate, service_values
from src.core.errors import ConvergenceError, DomainError, ModeMismatchError
from src.core.numerics import (
    QuadratureSettings,
    gaussian_window,
    integrate_1d,
    integrate_2d,
    integrate_panels,
    q_function,
    standard_normal_pdf,
    std_normal_cdf,
)
from src.core.params import (
    EXTENDED_LIMIT_SIGMAS,
    FfUpperLimit,
    MgfMode,
    ProbMode,
    SystemParams,
    decides_at_boundary,
    decision_threshold,
    fraunhofer_distance,
    require_decision_at_boundary,
    validate,
)
from src.core.ranging import annulus_density, boundary_points, clamp_probability
from src.core.regime_markov import (
    StateDistribution,
    StateId,
    conditional_state_mass,
    regime_density,
    regime_interval,
    s7_discrepancy,
    state_distribution,
    transition_matrix,
)

logger = logging.getLogger(__name__)

# Inner panel width in standard deviations
PANEL_WIDTH = 0.5
MIN_STATE_MASS = 1e-15
POWER_ITERATION_TOL = 1e-12
POWER_ITERATION_MAX = 10_000


@dataclass
class StateMgfs:
    """M_{R|S_i}(theta) for S1..S8 (index 0 holds S1) and the matching deficits 1 - M."""

    values: np.ndarray
    deficits: np.ndarray
    mode: MgfMode
    theta: float

    def value(self, state: StateId) -> float:
        return float(self.values[state - 1])


@dataclass
class EcResult:
    """Effective capacity with the quantities it was assembled from."""

    theta: float
    ec_bits_per_use: float
    state_probs: StateDistribution
    mgfs: StateMgfs
    log_mgf_sum: float
    pre_normalization_sum: float
    s7_literal_surplus: Optional[float] = None
    ff_upper_limit_gap: Optional[float] = None
    clamp_probability: Optional[float] = None

    def to_dict(self) -> dict:
        states = [s.name for s in StateId]
        return {
            "theta": self.theta,
            "ec_bits_per_use": self.ec_bits_per_use,
            "log_mgf_sum": self.log_mgf_sum,
            "prob_mode": self.state_probs.mode.value,
            "mgf_mode": self.mgfs.mode.value,
            "state_probs": dict(zip(states, map(float, self.state_probs.probs))),
            "mgfs": dict(zip(states, map(float, self.mgfs.values))),
            "pre_normalization_sum": self.pre_normalization_sum,
            "s7_literal_surplus": self.s7_literal_surplus,
            "ff_upper_limit_gap": self.ff_upper_limit_gap,
            "clamp_probability": self.clamp_probability,
        }


def _check_inputs(theta: float, params: SystemParams) -> float:
    require_decision_at_boundary(params)
    if not theta > 0 or not math.isfinite(theta):
        raise DomainError(f"theta must be positive and finite, got {theta}")
    if params.sigma_d_m <= 0:
        raise DomainError("per-state MGFs require sigma_d > 0")
    return params.sigma_d_m


def _check_regime(state: StateId, d: float, params: SystemParams) -> None:
    d_f = fraunhofer_distance(params)
    if state.is_near and d >= d_f:
        raise DomainError(f"{state.name} is an NF state; requires d < d_F")
    if not state.is_near and d < d_f:
        raise DomainError(f"{state.name} is an FF state; requires d >= d_F")


def _region_window(
    state: StateId,
    d: float,
    params: SystemParams,
    mode: MgfMode,
    upper: FfUpperLimit,
) -> Optional[tuple[float, float]]:
    """Standardized d_hat interval of a reliable state's decision region, clipped to the span."""
    sigma = params.sigma_d_m
    d_f = fraunhofer_distance(params)
    if state == StateId.S1:
        lo, hi = d, d_f
    else:
        lo = d_f if state == StateId.S3 else d
        if mode == MgfMode.NORMALIZED:
            hi = math.inf
        elif upper == FfUpperLimit.EXTENDED:
            hi = d + EXTENDED_LIMIT_SIGMAS * sigma
        else:
            hi = params.d_max_m
    return gaussian_window((lo - d) / sigma, (hi - d) / sigma)


def _gaussian_mass(t_lo: float, t_hi: float) -> float:
    if t_lo > 0:
        return float(q_function(t_lo) - q_function(t_hi))
    return float(std_normal_cdf(t_hi) - std_normal_cdf(t_lo))


def _discount(theta: float, rate, deficit: bool):
    """e^{-theta R}, or 1 - e^{-theta R} without cancellation."""
    if deficit:
        return -np.expm1(-theta * np.asarray(rate))
    return np.exp(-theta * np.asarray(rate))


def _inner_points(d: float, params: SystemParams) -> list[float]:
    sigma = params.sigma_d_m
    points = [0.0, (decision_threshold(params) - d) / sigma, (params.d_min_m - d) / sigma]
    if not decides_at_boundary(params):
        # outage edges move off d_hat = d once the switch leaves d_F
        points += [(x - d) / sigma for x in rate_crossings(d, params)]
    return points


def _outer_points(params: SystemParams, near: bool) -> list[float]:
    sigma = params.sigma_d_m
    points = boundary_points(params, -1 if near else +1)
    if not near:
        points += [params.d_max_m - k * sigma for k in (0.5, 2.0, 5.0, 10.0)]
    else:
        points += [params.d_min_m + k * sigma for k in (1.0, 5.0, 12.0)]
    if not decides_at_boundary(params):
        points.append(decision_threshold(params))
    return points


def _state_integral(
    state: StateId,
    theta: float,
    params: SystemParams,
    mode: MgfMode,
    upper: FfUpperLimit,
    deficit: bool,
    settings: Optional[QuadratureSettings],
) -> float:
    """Outer integral over d of the regime density times the inner region integral.

    Normalized mode weighs the inner integral by the truncated density (division
    by Phi(d/sigma)); PaperLiteral keeps the plain Gaussian weight.
    """
    sigma = params.sigma_d_m
    near = state.is_near
    truncated = mode == MgfMode.NORMALIZED

    def window(d: float) -> tuple[float, float]:
        bounds = _region_window(state, d, params, mode, upper)
        return bounds if bounds is not None else (0.0, 0.0)

    def integrand(d: float, t: np.ndarray) -> np.ndarray:
        weight = regime_density(d, params, near)
        if truncated:
            weight = weight / std_normal_cdf(d / sigma)
        rate = scheduled_rate(np.maximum(d + sigma * t, 0.0), params)
        return weight * standard_normal_pdf(t) * _discount(theta, rate, deficit)

    return integrate_2d(
        integrand,
        regime_interval(params, near),
        window,
        settings,
        outer_points=_outer_points(params, near),
        inner_points=lambda d: _inner_points(d, params),
        inner_width=lambda d: PANEL_WIDTH,
        vectorized_inner=True,
    ).value


def mgf_state_cond(
    state: StateId,
    d: float,
    theta: float,
    params: SystemParams,
    settings: Optional[QuadratureSettings] = None,
) -> float:
    """MGF of the service rate in state S_i at a fixed true distance d.

    Normalized: E[e^{-theta R(d_hat)} | S_i, d]. PaperLiteral: the plain-Gaussian
    weighted integral of e^{-theta R} over the state's region, unnormalized.
    Outage and empty states give 1.
    """
    state = StateId(state)
    sigma = _check_inputs(theta, params)
    _check_regime(state, d, params)
    if state.is_outage or state.is_empty:
        return 1.0

    mode = params.mgf_mode
    bounds = _region_window(state, d, params, mode, params.ff_mgf_upper)
    if bounds is None:
        if mode == MgfMode.PAPER_LITERAL:
            return 0.0
        # Region carries no Gaussian mass: the estimate sits at the region start
        edge = fraunhofer_distance(params) if state == StateId.S3 else d
        return float(math.exp(-theta * scheduled_rate(edge, params)))

    t_lo, t_hi = bounds
    deficit = mode == MgfMode.NORMALIZED
    inner = integrate_panels(
        lambda t: standard_normal_pdf(t)
        * _discount(theta, scheduled_rate(np.maximum(d + sigma * t, 0.0), params), deficit),
        t_lo,
        t_hi,
        _inner_points(d, params),
        PANEL_WIDTH,
    ).value
    if mode == MgfMode.PAPER_LITERAL:
        return inner
    return 1.0 - inner / _gaussian_mass(t_lo, t_hi)


def _state_mgf(
    state: StateId,
    theta: float,
    params: SystemParams,
    mode: MgfMode,
    upper: FfUpperLimit,
    state_mass: Optional[float],
    settings: Optional[QuadratureSettings],
) -> tuple[float, float]:
    """(M, 1 - M) of one state's unconditional MGF."""
    if state.is_outage or state.is_empty:
        return 1.0, 0.0

    if mode == MgfMode.PAPER_LITERAL:
        value = _state_integral(state, theta, params, mode, upper, False, settings)
        return value, 1.0 - value

    if state_mass is None:
        state_mass = conditional_state_mass(state, params, ProbMode.GEOMETRIC_PRIOR, settings)
    if state_mass < MIN_STATE_MASS:
        return 1.0, 0.0
    deficit = _state_integral(state, theta, params, mode, upper, True, settings) / state_mass
    return 1.0 - deficit, deficit


def mgf_state(
    state: StateId,
    theta: float,
    params: SystemParams,
    settings: Optional[QuadratureSettings] = None,
) -> float:
    """Unconditional MGF of the service rate in state S_i."""
    state = StateId(state)
    _check_inputs(theta, params)
    value, _ = _state_mgf(state, theta, params, params.mgf_mode, params.ff_mgf_upper, None, settings)
    return value


def state_mgfs(
    theta: float,
    params: SystemParams,
    dist: Optional[StateDistribution] = None,
    settings: Optional[QuadratureSettings] = None,
) -> StateMgfs:
    """All eight unconditional MGFs, reusing the state masses of `dist` when given."""
    _check_inputs(theta, params)
    mode = params.mgf_mode
    values = np.ones(len(StateId))
    deficits = np.zeros(len(StateId))
    for state in StateId:
        mass = None
        if dist is not None and dist.mode == ProbMode.GEOMETRIC_PRIOR:
            mass = float(dist.regime_mass[state - 1])
        values[state - 1], deficits[state - 1] = _state_mgf(
            state, theta, params, mode, params.ff_mgf_upper, mass, settings
        )
    return StateMgfs(values=values, deficits=deficits, mode=mode, theta=theta)


def _check_pairing(params: SystemParams) -> None:
    pairs = {
        ProbMode.GEOMETRIC_PRIOR: MgfMode.NORMALIZED,
        ProbMode.PAPER_LITERAL: MgfMode.PAPER_LITERAL,
    }
    if pairs[params.prob_mode] != params.mgf_mode:
        raise ModeMismatchError(
            f"prob_mode={params.prob_mode.value} cannot be combined with mgf_mode={params.mgf_mode.value}"
        )


def _unit_weights(dist: StateDistribution) -> np.ndarray:
    probs = np.asarray(dist.probs, dtype=float)
    return probs / probs.sum()


def ff_upper_limit_gap(
    theta: float, params: SystemParams, settings: Optional[QuadratureSettings] = None
) -> float:
    """Unprinted-limit S7 MGF minus the printed one (both unnormalized)."""
    _check_inputs(theta, params)
    extended = _state_integral(
        StateId.S7, theta, params, MgfMode.PAPER_LITERAL, FfUpperLimit.EXTENDED, False, settings
    )
    printed = _state_integral(
        StateId.S7, theta, params, MgfMode.PAPER_LITERAL, FfUpperLimit.PAPER, False, settings
    )
    return extended - printed


def effective_capacity(
    theta: float,
    params: SystemParams,
    settings: Optional[QuadratureSettings] = None,
    diagnostics: bool = True,
    dist: Optional[StateDistribution] = None,
) -> EcResult:
    """EC = -(1/theta) ln(sum_i P_i M_i), evaluated as -(1/theta) log1p(-sum_i P_i (1 - M_i)).

    The probability vector is scaled to unit sum before assembly. `dist` reuses a
    state distribution already computed for the same parameters.

    Raises:
        ModeMismatchError: ProbMode and MgfMode are not a matching pair
        DomainError: theta <= 0 or sigma_d = 0
    """
    validate(params)
    _check_inputs(theta, params)
    _check_pairing(params)

    if dist is None:
        dist = state_distribution(params, settings)
    mgfs = state_mgfs(theta, params, dist, settings)
    weights = _unit_weights(dist)
    shortfall = float(np.dot(weights, mgfs.deficits))
    ec = -math.log1p(-shortfall) / theta

    result = EcResult(
        theta=theta,
        ec_bits_per_use=ec,
        state_probs=dist,
        mgfs=mgfs,
        log_mgf_sum=float(np.dot(weights, mgfs.values)),
        pre_normalization_sum=dist.pre_normalization_sum,
    )
    if diagnostics:
        result.s7_literal_surplus = s7_discrepancy(params, settings)
        result.ff_upper_limit_gap = ff_upper_limit_gap(theta, params, settings)
        result.clamp_probability = clamp_probability(params, settings)
    logger.info(
        f"EC(theta={theta:g}, sigma_d={params.sigma_d_m:g}, {params.prob_mode.value}) "
        f"= {ec:.6f} bits/use"
    )
    return result


def spectral_radius(
    matrix: np.ndarray, tol: float = POWER_ITERATION_TOL, max_iter: int = POWER_ITERATION_MAX
) -> float:
    """Dominant eigenvalue of a nonnegative matrix by power iteration.

    Raises:
        ConvergenceError: tolerance not met within max_iter iterations
    """
    matrix = np.asarray(matrix, dtype=float)
    n = matrix.shape[0]
    x = np.full(n, 1.0 / n)
    estimate = 0.0
    for iteration in range(1, max_iter + 1):
        y = matrix @ x
        total = y.sum()
        if total <= 0:
            return 0.0
        previous, estimate = estimate, total / x.sum()
        x = y / total
        if abs(estimate - previous) <= tol * abs(estimate):
            logger.debug(f"Power iteration converged after {iteration} steps")
            return float(estimate)
    raise ConvergenceError(f"power iteration did not converge in {max_iter} iterations")


def effective_capacity_spectral(
    theta: float,
    params: SystemParams,
    settings: Optional[QuadratureSettings] = None,
    result: Optional[EcResult] = None,
) -> float:
    """EC = -(1/theta) ln sp(P Theta(theta)) with Theta = diag(M_i).

    `result` reuses the state distribution and MGFs of an earlier evaluation.
    """
    if result is None:
        result = effective_capacity(theta, params, settings, diagnostics=False)
    chain = transition_matrix(result.state_probs).matrix
    chain = chain / chain.sum(axis=1, keepdims=True)
    radius = spectral_radius(chain * result.mgfs.values[None, :])
    return -math.log1p(radius - 1.0) / theta


def _joint_expectation(
    params: SystemParams,
    transform: Callable[[np.ndarray], np.ndarray],
    settings: Optional[QuadratureSettings] = None,
) -> float:
    """E[transform(s)] over the joint law of (d, d_hat) and both regimes."""
    validate(params)
    sigma = params.sigma_d_m
    d_f = fraunhofer_distance(params)

    if sigma == 0:
        return integrate_1d(
            lambda d: annulus_density(d, params) * transform(service_values(d, d, params)[2]),
            params.d_min_m,
            params.d_max_m,
            settings,
            points=[d_f, decision_threshold(params)],
        ).value

    span = get_settings().gaussian_span

    def window(d: float) -> tuple[float, float]:
        return max(-d / sigma, -span), span

    def integrand(d: float, t: np.ndarray) -> np.ndarray:
        _, _, service = service_values(d, np.maximum(d + sigma * t, 0.0), params)
        weight = annulus_density(d, params) / std_normal_cdf(d / sigma)
        return weight * standard_normal_pdf(t) * transform(service)

    total = 0.0
    for near in (True, False):
        total += integrate_2d(
            integrand,
            regime_interval(params, near),
            window,
            settings,
            outer_points=_outer_points(params, near),
            inner_points=lambda d: _inner_points(d, params),
            inner_width=lambda d: PANEL_WIDTH,
            vectorized_inner=True,
        ).value
    return total


def mean_service_rate(params: SystemParams, settings: Optional[QuadratureSettings] = None) -> float:
    """E[s] in bits per channel use."""
    return _joint_expectation(params, lambda s: s, settings)


def expected_deficit(
    theta: float, params: SystemParams, settings: Optional[QuadratureSettings] = None
) -> float:
    """E[1 - e^{-theta s}] by one nested quadrature over the joint law."""
    if not theta > 0:
        raise DomainError(f"theta must be positive, got {theta}")
    return _joint_expectation(params, lambda s: _discount(theta, s, True), settings)


def expected_discount(
    theta: float, params: SystemParams, settings: Optional[QuadratureSettings] = None
) -> float:
    """Definitional E[e^{-theta s}], independent of the state decomposition."""
    return 1.0 - expected_deficit(theta, params, settings)


def direct_effective_capacity(
    theta: float, params: SystemParams, settings: Optional[QuadratureSettings] = None
) -> float:
    """-(1/theta) ln E[e^{-theta s}] from the joint law."""
    return -math.log1p(-expected_deficit(theta, params, settings)) / theta
