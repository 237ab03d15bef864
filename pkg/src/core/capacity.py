"""Near-field and far-field capacity laws, the scheduler's rate rule and the realized service.

Every rate function accepts a scalar or a numpy array of distances and returns the
same shape (a Python float for scalar input). The Monte Carlo simulator and the
analytical integrands call these same functions.
"""

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np
from scipy.optimize import brentq

from src.core.errors import DomainError
from src.core.params import SystemParams, decision_threshold, fraunhofer_distance, near_field_limit

logger = logging.getLogger(__name__)

CROSSING_GRID = 256


class Regime(str, Enum):
    NEAR_FIELD = "near_field"
    FAR_FIELD = "far_field"


@dataclass(frozen=True)
class SlotRates:
    """Rates of one slot given the true and the estimated distance."""

    scheduled_rate: float
    true_capacity: float
    service: float
    in_outage: bool


def _out(values: np.ndarray, scalar: bool):
    return float(values) if scalar else values


def v_coupling(d, params: SystemParams):
    """Phase-compensation term v(d) = ln[((L_t+L_r)^2 + 4d^2) / ((L_t-L_r)^2 + 4d^2)]."""
    d_arr = np.asarray(d, dtype=float)
    if np.any(d_arr <= 0):
        raise DomainError("v(d) requires d > 0")
    lt, lr = params.aperture_tx_m, params.aperture_rx_m
    # (L_t+L_r)^2 - (L_t-L_r)^2 = 4 L_t L_r
    values = np.log1p(4.0 * lt * lr / ((lt - lr) ** 2 + 4.0 * np.square(d_arr)))
    return _out(values, d_arr.ndim == 0)


def u_coupling(d, params: SystemParams):
    """Array-coupling multiplier u(d) = (2 L_t L_r - d^2 v)^2 / (L_t L_r lambda d - lambda^2 d^2 / 4)."""
    d_arr = np.asarray(d, dtype=float)
    limit = near_field_limit(params)
    if np.any(d_arr <= 0) or np.any(d_arr >= limit):
        raise DomainError(f"u(d) requires 0 < d < {limit:.6g} m")
    lam = params.wavelength_m
    ltlr = params.aperture_product
    v = np.asarray(v_coupling(d_arr, params))
    numerator = np.square(2.0 * ltlr - np.square(d_arr) * v)
    denominator = ltlr * lam * d_arr - lam**2 * np.square(d_arr) / 4.0
    return _out(numerator / denominator, d_arr.ndim == 0)


def capacity_near(d, params: SystemParams):
    """Continuous-aperture NF capacity C_n(d) in bits per channel use."""
    d_arr = np.asarray(d, dtype=float)
    u = np.asarray(u_coupling(d_arr, params))
    lam = params.wavelength_m
    ltlr = params.aperture_product
    d2 = np.square(d_arr)
    gain = np.square(ltlr * lam / (d2 * d_arr) - lam**2 / (4.0 * d2))
    spread = 2.0 * ltlr / d2 - np.asarray(v_coupling(d_arr, params))
    snr_term = params.c0 * gain / spread**3 * params.rho
    if np.any(~np.isfinite(snr_term)) or np.any(1.0 + snr_term <= 0):
        raise DomainError("C_n(d): logarithm argument is not positive")
    return _out(u * np.log2(1.0 + snr_term), d_arr.ndim == 0)


def capacity_far(d, params: SystemParams):
    """Friis-type FF capacity C_f(d) = log2(1 + c0 L_t L_r rho / d^2)."""
    d_arr = np.asarray(d, dtype=float)
    if np.any(d_arr <= 0):
        raise DomainError("C_f(d) requires d > 0")
    values = np.log2(1.0 + params.c0 * params.aperture_product * params.rho / np.square(d_arr))
    return _out(values, d_arr.ndim == 0)


def true_capacity(d, params: SystemParams):
    """Capacity of the regime the user actually occupies."""
    d_arr = np.asarray(d, dtype=float)
    d_f = fraunhofer_distance(params)
    near = d_arr < d_f
    values = np.empty_like(d_arr, dtype=float)
    if np.any(near):
        values[near] = capacity_near(d_arr[near], params)
    if np.any(~near):
        values[~near] = capacity_far(d_arr[~near], params)
    return _out(values, d_arr.ndim == 0)


def scheduled_rate(d_hat, params: SystemParams):
    """Rate the BS schedules from its distance estimate.

    NF law below the decision threshold (evaluated no closer than d_min), FF law at
    and above it. The threshold is d_F unless the parameters move it.
    """
    d_arr = np.asarray(d_hat, dtype=float)
    if np.any(d_arr < 0):
        raise DomainError("scheduled_rate requires d_hat >= 0")
    near = d_arr < decision_threshold(params)
    values = np.empty_like(d_arr, dtype=float)
    if np.any(near):
        values[near] = capacity_near(np.maximum(d_arr[near], params.d_min_m), params)
    if np.any(~near):
        values[~near] = capacity_far(d_arr[~near], params)
    return _out(values, d_arr.ndim == 0)


def service_values(d, d_hat, params: SystemParams) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized (scheduled, true capacity, service) for arrays of (d, d_hat)."""
    scheduled = np.asarray(scheduled_rate(d_hat, params), dtype=float)
    capacity = np.asarray(true_capacity(d, params), dtype=float)
    service = np.where(scheduled <= capacity, scheduled, 0.0)
    return scheduled, capacity, service


def rate_crossings(d: float, params: SystemParams, n_grid: int = CROSSING_GRID) -> list[float]:
    """Estimates at which the scheduled rate equals the true capacity at d.

    The FF branch inverts C_f in closed form. The NF branch is not monotone up to
    2 d_F, so it is scanned on a grid and each sign change refined with brentq.
    """
    target = float(true_capacity(d, params))
    threshold = decision_threshold(params)
    points = []

    far = math.sqrt(params.c0 * params.aperture_product * params.rho / math.expm1(target * math.log(2.0)))
    if far >= threshold:
        points.append(far)

    grid = np.linspace(params.d_min_m, threshold, n_grid)
    gap = np.asarray(capacity_near(grid, params)) - target
    for i in np.flatnonzero(np.sign(gap[:-1]) != np.sign(gap[1:])):
        points.append(brentq(lambda x: capacity_near(x, params) - target, grid[i], grid[i + 1]))
    return points


def service_rate(d: float, d_hat: float, params: SystemParams) -> SlotRates:
    """Realized service: the scheduled rate if it does not exceed the true capacity, else 0."""
    scheduled, capacity, service = service_values(d, d_hat, params)
    scheduled_f, service_f = float(scheduled), float(service)
    return SlotRates(
        scheduled_rate=scheduled_f,
        true_capacity=float(capacity),
        service=service_f,
        in_outage=service_f == 0.0 and scheduled_f > 0.0,
    )


@dataclass
class MonotonicityReport:
    """Grid check of the composite scheduled rate."""

    grid: np.ndarray
    rates: np.ndarray
    monotone: bool
    near_monotone: Optional[bool]
    far_monotone: Optional[bool]
    boundary_jump: float  # C_n(t-) - C_f(t) at the decision threshold t
    worst_increase: float


def check_rate_monotonicity(params: SystemParams, n_grid: int = 400) -> MonotonicityReport:
    """Evaluate scheduled_rate on a log-spaced grid over [d_min, d_max] and check it never increases."""
    if n_grid < 2:
        raise ValueError("n_grid must be >= 2")
    switch = decision_threshold(params)
    grid = np.geomspace(params.d_min_m, params.d_max_m, n_grid)
    rates = np.asarray(scheduled_rate(grid, params))
    steps = np.diff(rates)
    worst = float(steps.max())

    near = grid < switch
    near_monotone = bool(np.all(np.diff(rates[near]) <= 0)) if near.sum() >= 2 else None
    far_monotone = bool(np.all(np.diff(rates[~near]) <= 0)) if (~near).sum() >= 2 else None

    # Left limit of the NF law at the switch
    d_left = np.nextafter(switch, 0.0)
    jump = float(capacity_near(d_left, params) - capacity_far(switch, params))

    report = MonotonicityReport(
        grid=grid,
        rates=rates,
        monotone=bool(np.all(steps <= 0)),
        near_monotone=near_monotone,
        far_monotone=far_monotone,
        boundary_jump=jump,
        worst_increase=worst,
    )
    logger.debug(f"Rate monotone={report.monotone}, boundary jump={jump:.3e} bits")
    return report
