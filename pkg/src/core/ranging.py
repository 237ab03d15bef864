"""Truncated-Gaussian ranging model, the NF/FF hypothesis test and misclassification probabilities."""

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from src.core.capacity import Regime
from src.core.errors import DomainError
from src.core.numerics import QuadratureSettings, integrate_1d, q_function, std_normal_cdf
from src.core.params import (
    SystemParams,
    decision_threshold,
    fraunhofer_distance,
    regime_priors,
    require_decision_at_boundary,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class RangingOutcome:
    """One distance estimate and the regime decision taken from it."""

    d_true: float
    d_hat: float
    decided: Regime
    correct: bool


def trunc_gauss_cdf(d_hat, d: float, sigma: float):
    """Pr(D_hat <= d_hat | D_hat >= 0) for D_hat ~ N(d, sigma^2)."""
    d_hat_arr = np.asarray(d_hat, dtype=float)
    if np.any(d_hat_arr < 0):
        raise DomainError("trunc_gauss_cdf requires d_hat >= 0")
    if d <= 0 or sigma <= 0:
        raise DomainError("trunc_gauss_cdf requires d > 0 and sigma > 0")
    values = (std_normal_cdf((d_hat_arr - d) / sigma) - std_normal_cdf(-d / sigma)) / std_normal_cdf(
        d / sigma
    )
    return float(values) if d_hat_arr.ndim == 0 else values


def sample_estimate(d, sigma: float, rng: np.random.Generator, size: Optional[int] = None):
    """Draw d_hat ~ N(d, sigma^2) conditioned on d_hat >= 0 by rejection.

    `d` may be a scalar (with optional `size`) or an array of true distances.
    """
    d_arr = np.asarray(d, dtype=float)
    if size is not None:
        d_arr = np.broadcast_to(d_arr, (size,)).copy()
    if sigma == 0:
        return float(d_arr) if d_arr.ndim == 0 else d_arr.copy()

    if d_arr.ndim == 0:
        while True:
            draw = d_arr + sigma * rng.standard_normal()
            if draw >= 0:
                return float(draw)

    draws = d_arr + sigma * rng.standard_normal(d_arr.shape)
    rejected = np.flatnonzero(draws < 0)
    while rejected.size:
        draws[rejected] = d_arr[rejected] + sigma * rng.standard_normal(rejected.size)
        rejected = rejected[draws[rejected] < 0]
    return draws


def classify(d_hat, d_f: float):
    """NearField iff d_hat < d_F (the boundary itself is FF)."""
    d_hat_arr = np.asarray(d_hat, dtype=float)
    if d_hat_arr.ndim == 0:
        return Regime.NEAR_FIELD if d_hat_arr < d_f else Regime.FAR_FIELD
    return d_hat_arr < d_f


def ranging_outcome(d: float, d_hat: float, params: SystemParams) -> RangingOutcome:
    d_f = fraunhofer_distance(params)
    decided = classify(d_hat, decision_threshold(params))
    return RangingOutcome(
        d_true=d,
        d_hat=d_hat,
        decided=decided,
        correct=(d < d_f) == (decided == Regime.NEAR_FIELD),
    )


def _require_sigma(params: SystemParams) -> float:
    sigma = params.sigma_d_m
    if sigma <= 0:
        raise DomainError("analytical ranging formulas require sigma_d > 0")
    return sigma


def p_false_far_cond(d, params: SystemParams):
    """Type I error Pr(d_hat >= d_F | d, d_hat >= 0) for an NF user."""
    require_decision_at_boundary(params)
    sigma = _require_sigma(params)
    d_f = fraunhofer_distance(params)
    d_arr = np.asarray(d, dtype=float)
    if np.any(d_arr >= d_f):
        raise DomainError("p_false_far_cond requires d < d_F")
    values = q_function((d_f - d_arr) / sigma) / std_normal_cdf(d_arr / sigma)
    return float(values) if d_arr.ndim == 0 else values


def p_false_near_cond(d, params: SystemParams):
    """Type II error Pr(0 <= d_hat < d_F | d, d_hat >= 0) for an FF user."""
    require_decision_at_boundary(params)
    sigma = _require_sigma(params)
    d_f = fraunhofer_distance(params)
    d_arr = np.asarray(d, dtype=float)
    if np.any(d_arr < d_f):
        raise DomainError("p_false_near_cond requires d >= d_F")
    values = (
        std_normal_cdf((d_f - d_arr) / sigma) - std_normal_cdf(-d_arr / sigma)
    ) / std_normal_cdf(d_arr / sigma)
    return float(values) if d_arr.ndim == 0 else values


def annulus_density(d, params: SystemParams):
    """Radial density 2d / (d_max^2 - d_min^2) of an area-uniform user."""
    return 2.0 * np.asarray(d, dtype=float) / (params.d_max_m**2 - params.d_min_m**2)


def boundary_points(params: SystemParams, side: int) -> list[float]:
    """Breakpoints where the conditional probabilities change on a sigma_d scale.

    side = -1 for the NF interval, +1 for the FF interval.
    """
    d_f = fraunhofer_distance(params)
    sigma = params.sigma_d_m
    return [d_f + side * k * sigma for k in (0.5, 2.0, 5.0, 10.0)]


def p_false_far(params: SystemParams, settings: Optional[QuadratureSettings] = None) -> float:
    """Joint probability Pr(d_hat >= d_F, d < d_F) under the full-annulus density."""
    d_f = fraunhofer_distance(params)
    return integrate_1d(
        lambda d: p_false_far_cond(d, params) * annulus_density(d, params),
        params.d_min_m,
        d_f,
        settings,
        points=boundary_points(params, -1),
    ).value


def p_false_near(params: SystemParams, settings: Optional[QuadratureSettings] = None) -> float:
    """Joint probability Pr(d_hat < d_F, d >= d_F) under the full-annulus density."""
    d_f = fraunhofer_distance(params)
    return integrate_1d(
        lambda d: p_false_near_cond(d, params) * annulus_density(d, params),
        d_f,
        params.d_max_m,
        settings,
        points=boundary_points(params, +1),
    ).value


@dataclass(frozen=True)
class ErrorProbabilityReport:
    """Both conventions for the misclassification probabilities."""

    p_false_far_joint: float
    p_false_near_joint: float
    p_false_far_given_near: float
    p_false_near_given_far: float
    prior_near: float
    prior_far: float


def error_probability_report(
    params: SystemParams, settings: Optional[QuadratureSettings] = None
) -> ErrorProbabilityReport:
    """Joint error probabilities as printed plus the per-regime conditional error rates."""
    prior_near, prior_far = regime_priors(params)
    pff = p_false_far(params, settings)
    pfn = p_false_near(params, settings)
    return ErrorProbabilityReport(
        p_false_far_joint=pff,
        p_false_near_joint=pfn,
        p_false_far_given_near=pff / prior_near,
        p_false_near_given_far=pfn / prior_far,
        prior_near=prior_near,
        prior_far=prior_far,
    )


def clamp_probability(params: SystemParams, settings: Optional[QuadratureSettings] = None) -> float:
    """Pr(d_hat < d_min): how often the NF rate is evaluated at the clamp."""
    sigma = _require_sigma(params)
    d_min = params.d_min_m

    def integrand(d: float) -> float:
        below = std_normal_cdf((d_min - d) / sigma) - std_normal_cdf(-d / sigma)
        return below / std_normal_cdf(d / sigma) * annulus_density(d, params)

    return integrate_1d(
        integrand,
        d_min,
        params.d_max_m,
        settings,
        points=[d_min + k * sigma for k in (1.0, 5.0, 12.0)],
    ).value


def sample_distance(d_min: float, d_max: float, rng: np.random.Generator, size: Optional[int] = None):
    """Area-uniform radius on the annulus by inverse CDF."""
    if not 0 < d_min < d_max:
        raise DomainError("sample_distance requires 0 < d_min < d_max")
    u = rng.random(size)
    values = np.sqrt(d_min**2 + u * (d_max**2 - d_min**2))
    return float(values) if size is None else values
