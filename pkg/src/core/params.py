"""System configuration, unit conventions and the NF/FF boundary geometry.

All lengths are in metres, capacities in bits per channel use.
"""

import logging
import math
from enum import Enum
from typing import Optional

from pydantic import BaseModel, ConfigDict, Field

from src.core.errors import DomainError, ParameterError

logger = logging.getLogger(__name__)

SPEED_OF_LIGHT = 299_792_458.0
DEFAULT_CARRIER_HZ = 28e9
DEFAULT_WAVELENGTH = SPEED_OF_LIGHT / DEFAULT_CARRIER_HZ

# C_f(d_max = 500 m) ≈ 1 bit at the default apertures and c0 = 1
DEFAULT_SNR = 8.7232e5


class ProbMode(str, Enum):
    """How the unconditional state probabilities are weighted."""

    PAPER_LITERAL = "paper_literal"
    GEOMETRIC_PRIOR = "geometric_prior"


class MgfMode(str, Enum):
    """How the per-state MGFs are normalized."""

    PAPER_LITERAL = "paper_literal"
    NORMALIZED = "normalized"


class FfUpperLimit(str, Enum):
    """Upper integration limit of the FF estimate regions."""

    PAPER = "paper"  # d_max
    EXTENDED = "extended"  # d + 10 sigma_d


EXTENDED_LIMIT_SIGMAS = 10.0


class SystemParams(BaseModel):
    """Physical and statistical configuration of one link."""

    model_config = ConfigDict(frozen=True, extra="forbid", use_enum_values=False)

    wavelength_m: float = Field(default=DEFAULT_WAVELENGTH, description="Carrier wavelength")
    aperture_tx_m: float = Field(default=100 * DEFAULT_WAVELENGTH, description="BS aperture L_t")
    aperture_rx_m: float = Field(default=25 * DEFAULT_WAVELENGTH, description="UT aperture L_r")
    tx_power_w: float = Field(default=1.0, description="Transmit power P")
    noise_psd: Optional[float] = Field(
        default=None, description="Noise PSD N0; when set, rho = P / N0 overrides snr"
    )
    snr: float = Field(default=DEFAULT_SNR, description="rho = P / N0")
    c0: float = Field(default=1.0, description="Aperture/pattern constant")
    d_min_m: float = Field(default=1.0, description="Inner radius of the cell annulus")
    d_max_m: float = Field(default=500.0, description="Outer radius of the cell annulus")
    sigma_d_m: float = Field(default=5.0, description="Ranging standard deviation")
    theta: float = Field(default=0.01, description="QoS exponent per bit")
    decision_threshold_m: Optional[float] = Field(
        default=None, description="Estimate at which the scheduler switches to the FF law; None means d_F"
    )
    prob_mode: ProbMode = ProbMode.GEOMETRIC_PRIOR
    mgf_mode: MgfMode = MgfMode.NORMALIZED
    ff_mgf_upper: FfUpperLimit = FfUpperLimit.PAPER

    @property
    def rho(self) -> float:
        """Effective SNR used by the capacity laws."""
        if self.noise_psd is not None:
            return self.tx_power_w / self.noise_psd
        return self.snr

    @property
    def aperture_product(self) -> float:
        return self.aperture_tx_m * self.aperture_rx_m


def fraunhofer_distance(params: SystemParams) -> float:
    """Rayleigh distance 2 L_t L_r / lambda separating the NF and FF regimes."""
    return 2.0 * params.aperture_tx_m * params.aperture_rx_m / params.wavelength_m


def near_field_limit(params: SystemParams) -> float:
    """Root of the u(d) denominator; the NF capacity law is defined below it (= 2 d_F)."""
    return 4.0 * params.aperture_tx_m * params.aperture_rx_m / params.wavelength_m


def decision_threshold(params: SystemParams) -> float:
    """Estimated distance at and above which the scheduler applies the FF rate law."""
    if params.decision_threshold_m is None:
        return fraunhofer_distance(params)
    return params.decision_threshold_m


def decides_at_boundary(params: SystemParams) -> bool:
    return params.decision_threshold_m is None or params.decision_threshold_m == fraunhofer_distance(params)


def require_decision_at_boundary(params: SystemParams) -> None:
    """The closed-form state model labels decisions by d_hat against d_F.

    Raises:
        DomainError: the scheduler decides elsewhere; use the joint-law or Monte Carlo path
    """
    if not decides_at_boundary(params):
        raise DomainError(
            f"state model needs the decision threshold at d_F = {fraunhofer_distance(params):.6g} m, "
            f"got {params.decision_threshold_m:.6g} m"
        )


def regime_priors(params: SystemParams) -> tuple[float, float]:
    """Area-uniform probabilities (Pr(H0), Pr(H1)) of a user being NF / FF."""
    d_f = fraunhofer_distance(params)
    span = params.d_max_m**2 - params.d_min_m**2
    p_near = (d_f**2 - params.d_min_m**2) / span
    return p_near, 1.0 - p_near


def validate(params: SystemParams) -> SystemParams:
    """Check every SystemParams invariant and return the same parameters.

    Raises:
        ParameterError naming the first offending field.
    """
    _require_finite(params)

    if params.wavelength_m <= 0:
        raise ParameterError("wavelength_m", "must be positive")
    if params.aperture_rx_m <= 0:
        raise ParameterError("aperture_rx_m", "must be positive")
    if params.aperture_tx_m < params.aperture_rx_m:
        raise ParameterError("aperture_tx_m", "aperture ordering: L_t must be >= L_r")
    if params.d_min_m <= 0:
        raise ParameterError("d_min_m", "must be positive (the NF law is singular at d = 0)")
    if params.d_max_m <= params.d_min_m:
        raise ParameterError("d_max_m", "empty support: d_max must exceed d_min")
    if params.sigma_d_m < 0:
        raise ParameterError("sigma_d_m", "must be non-negative")
    if params.tx_power_w <= 0:
        raise ParameterError("tx_power_w", "must be positive")
    if params.noise_psd is not None and params.noise_psd <= 0:
        raise ParameterError("noise_psd", "must be positive")
    if params.snr <= 0:
        raise ParameterError("snr", "must be positive")
    if params.c0 <= 0:
        raise ParameterError("c0", "must be positive")
    if params.theta <= 0:
        raise ParameterError("theta", "must be positive")

    d_f = fraunhofer_distance(params)
    if not params.d_min_m < d_f < params.d_max_m:
        raise ParameterError(
            "d_max_m" if d_f >= params.d_max_m else "d_min_m",
            f"Fraunhofer distance {d_f:.6g} m outside the annulus "
            f"({params.d_min_m:.6g}, {params.d_max_m:.6g})",
        )
    if params.decision_threshold_m is not None:
        threshold = params.decision_threshold_m
        if not params.d_min_m < threshold < params.d_max_m:
            raise ParameterError("decision_threshold_m", "must lie inside the annulus")
        if threshold >= near_field_limit(params):
            raise ParameterError(
                "decision_threshold_m",
                f"NF rate law is undefined at and beyond {near_field_limit(params):.6g} m",
            )
    return params


def _require_finite(params: SystemParams) -> None:
    for name in (
        "wavelength_m",
        "aperture_tx_m",
        "aperture_rx_m",
        "tx_power_w",
        "snr",
        "c0",
        "d_min_m",
        "d_max_m",
        "sigma_d_m",
        "theta",
    ):
        if not math.isfinite(getattr(params, name)):
            raise ParameterError(name, "must be finite")
    if params.noise_psd is not None and not math.isfinite(params.noise_psd):
        raise ParameterError("noise_psd", "must be finite")
    if params.decision_threshold_m is not None and not math.isfinite(params.decision_threshold_m):
        raise ParameterError("decision_threshold_m", "must be finite")


def with_fraunhofer(params: SystemParams, d_f: float) -> SystemParams:
    """Rescale L_t (holding lambda and L_r) so that the Fraunhofer distance equals d_f."""
    aperture_tx = d_f * params.wavelength_m / (2.0 * params.aperture_rx_m)
    updated = params.model_copy(update={"aperture_tx_m": aperture_tx})
    logger.debug(f"d_F={d_f:.6g} m -> L_t={aperture_tx:.6g} m")
    return validate(updated)


def with_decision_threshold(params: SystemParams, threshold: float) -> SystemParams:
    """Move the scheduler's NF/FF switch to `threshold`, leaving apertures and d_F unchanged."""
    updated = params.model_copy(update={"decision_threshold_m": threshold})
    logger.debug(f"decision threshold {threshold:.6g} m at d_F={fraunhofer_distance(params):.6g} m")
    return validate(updated)
