"""Time-of-arrival ranging: CRLB for delay and distance, and a matched-filter estimator.

The bound links the waveform (through its mean-square bandwidth beta2) and the
round-trip SNR gamma to the ranging standard deviation sigma_d used by the link model.
"""

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np

from src.core.errors import ConfigError, ParameterError
from src.core.numerics import integrate_1d
from src.core.params import SPEED_OF_LIGHT

logger = logging.getLogger(__name__)

DEFAULT_ROLLOFF = 0.25
DEFAULT_FFT_SIZE = 1024
FINE_UPSAMPLE = 16
TRIAL_CHUNK = 256
MIN_TRIALS = 100


class WaveformShape(str, Enum):
    RECT = "rect"  # flat |X(f)|^2 over [-B/2, B/2]
    RRC = "rrc"  # root-raised-cosine pulse: raised-cosine |X(f)|^2
    GAUSSIAN = "gaussian"  # Gaussian |X(f)|^2 with FWHM = B


@dataclass(frozen=True)
class WaveformSpec:
    """Unit-energy transmit waveform described by its energy spectrum."""

    shape: WaveformShape = WaveformShape.RECT
    bandwidth_hz: float = 100e6
    rolloff: float = DEFAULT_ROLLOFF

    def __post_init__(self):
        if not self.bandwidth_hz > 0 or not math.isfinite(self.bandwidth_hz):
            raise ParameterError("bandwidth_hz", "must be positive")
        if self.shape == WaveformShape.RRC and not 0 < self.rolloff <= 1:
            raise ParameterError("rolloff", "must be in (0, 1]")


@dataclass(frozen=True)
class RangingLink:
    gamma: float
    beta2_hz2: float

    def __post_init__(self):
        if not self.gamma > 0:
            raise ParameterError("gamma", "must be positive")
        if not self.beta2_hz2 > 0:
            raise ParameterError("beta2_hz2", "must be positive")


def _gaussian_std(bandwidth_hz: float) -> float:
    return bandwidth_hz / (2.0 * math.sqrt(2.0 * math.log(2.0)))


def spectral_density(w: WaveformSpec, f):
    """|X(f)|^2 normalized so that it integrates to 1 over frequency."""
    f = np.abs(np.asarray(f, dtype=float))
    b = w.bandwidth_hz
    if w.shape == WaveformShape.RECT:
        return np.where(f <= b / 2.0, 1.0 / b, 0.0)
    if w.shape == WaveformShape.GAUSSIAN:
        s = _gaussian_std(b)
        return np.exp(-0.5 * np.square(f / s)) / (s * math.sqrt(2.0 * math.pi))

    # Raised cosine with symbol period T = (1 + alpha) / B
    alpha = w.rolloff
    period = (1.0 + alpha) / b
    flat_edge = (1.0 - alpha) / (2.0 * period)
    roll = 0.5 * period * (1.0 + np.cos(math.pi * period / alpha * (f - flat_edge)))
    return np.where(f <= flat_edge, period, np.where(f <= b / 2.0, roll, 0.0))


def mean_square_bandwidth(w: WaveformSpec) -> float:
    """beta2 = integral of f^2 |X(f)|^2 df."""
    b = w.bandwidth_hz
    if w.shape == WaveformShape.RECT:
        return b**2 / 12.0
    if w.shape == WaveformShape.GAUSSIAN:
        return _gaussian_std(b) ** 2

    # Integrate in units of B to keep the quadrature well scaled
    unit = WaveformSpec(w.shape, 1.0, w.rolloff)
    flat_edge = (1.0 - w.rolloff) / (2.0 * (1.0 + w.rolloff))
    half = integrate_1d(lambda x: x * x * spectral_density(unit, x), 0.0, 0.5, points=[flat_edge]).value
    return 2.0 * half * b**2


def crlb_toa_variance(link: RangingLink) -> float:
    """1 / (8 pi^2 gamma beta2) in s^2."""
    return 1.0 / (8.0 * math.pi**2 * link.gamma * link.beta2_hz2)


def crlb_distance_variance(link: RangingLink) -> float:
    """(c/2)^2 times the delay bound, in m^2."""
    return (SPEED_OF_LIGHT / 2.0) ** 2 * crlb_toa_variance(link)


def crlb_distance_variance_aperture(
    link: RangingLink,
    aperture_tx_m: float,
    aperture_rx_m: float,
    wavelength_m: Optional[float] = None,
) -> float:
    """Continuous-aperture bound: the delay bound divided by L_t L_r.

    With `wavelength_m` the apertures enter in wavelengths (L/lambda) instead of metres.
    """
    if aperture_tx_m <= 0 or aperture_rx_m <= 0:
        raise ParameterError("aperture", "apertures must be positive")
    product = aperture_tx_m * aperture_rx_m
    if wavelength_m is not None:
        if wavelength_m <= 0:
            raise ParameterError("wavelength_m", "must be positive")
        product /= wavelength_m**2
    return crlb_distance_variance(link) / product


def sigma_d_from_link(
    link: RangingLink,
    apertures: Optional[tuple[float, float]] = None,
    wavelength_m: Optional[float] = None,
) -> float:
    """Ranging standard deviation of a bound-attaining estimator (optimistic noise model)."""
    if apertures is None:
        return math.sqrt(crlb_distance_variance(link))
    return math.sqrt(crlb_distance_variance_aperture(link, apertures[0], apertures[1], wavelength_m))


def implied_link_product(sigma_d_m: float) -> float:
    """gamma * beta2 for which the distance bound equals sigma_d^2."""
    if not sigma_d_m > 0:
        raise ParameterError("sigma_d_m", "must be positive")
    return SPEED_OF_LIGHT**2 / (32.0 * math.pi**2 * sigma_d_m**2)


@dataclass
class ToaSimulation:
    """Distance estimates of repeated matched-filter trials."""

    bias: float
    variance: float
    estimates: np.ndarray


def _template_spectrum(w: WaveformSpec, freqs: np.ndarray, sample_rate_hz: float) -> np.ndarray:
    """Zero-phase sampled spectrum scaled so that sum |x_n|^2 / fs = 1."""
    spectrum = np.sqrt(spectral_density(w, freqs))
    n = freqs.size
    energy = np.sum(np.square(spectrum)) / n / sample_rate_hz
    return spectrum / math.sqrt(energy)


def sampled_template(
    w: WaveformSpec, sample_rate_hz: float, n_fft: int = DEFAULT_FFT_SIZE
) -> np.ndarray:
    """Time-domain samples of the template; sum |x_n|^2 / fs = 1."""
    freqs = np.fft.fftfreq(n_fft, d=1.0 / sample_rate_hz)
    return np.fft.ifft(_template_spectrum(w, freqs, sample_rate_hz))


def _refine_peaks(
    cross: np.ndarray, freqs: np.ndarray, coarse: np.ndarray, sample_rate_hz: float
) -> np.ndarray:
    """Fractional lag of each correlation peak in samples.

    The correlation is re-evaluated on a 1/FINE_UPSAMPLE grid within one sample of
    the coarse peak, then a parabola through the best grid point and its neighbours
    gives the final offset.
    """
    n = freqs.size
    offsets = np.arange(-FINE_UPSAMPLE, FINE_UPSAMPLE + 1) / FINE_UPSAMPLE
    lags = coarse[:, None] + offsets[None, :]
    # Shift every spectrum to its coarse lag, then evaluate at common offsets
    aligned = cross * np.exp(2j * np.pi * freqs[None, :] * coarse[:, None] / sample_rate_hz)
    kernel = np.exp(2j * np.pi * np.outer(freqs, offsets) / sample_rate_hz) / n
    fine = np.real(aligned @ kernel)

    best = np.clip(np.argmax(fine, axis=1), 1, offsets.size - 2)
    rows = np.arange(fine.shape[0])
    left, mid, right = fine[rows, best - 1], fine[rows, best], fine[rows, best + 1]
    curvature = left - 2.0 * mid + right
    shift = np.where(curvature < 0, 0.5 * (left - right) / np.where(curvature < 0, curvature, -1.0), 0.0)
    return lags[rows, best] + shift / FINE_UPSAMPLE


def simulate_toa_estimation(
    w: WaveformSpec,
    d: float,
    gamma: float,
    sample_rate_hz: float,
    n_trials: int,
    rng: np.random.Generator,
    n_fft: int = DEFAULT_FFT_SIZE,
) -> ToaSimulation:
    """Matched-filter ToA ranging over repeated noisy echoes.

    The echo of the template is delayed by tau = 2d/c through a spectral phase
    shift, complex white noise with per-sample variance fs/gamma is added, and the
    delay is read from the real cross-correlation peak. gamma = inf runs the
    noiseless path.

    Raises:
        ConfigError: undersampling, too few trials, or a delay outside the window
    """
    if sample_rate_hz < 4.0 * w.bandwidth_hz:
        raise ConfigError(f"sample rate {sample_rate_hz:g} Hz below 4 x bandwidth {w.bandwidth_hz:g} Hz")
    if n_trials < MIN_TRIALS:
        raise ConfigError(f"n_trials must be >= {MIN_TRIALS}")
    if not gamma > 0:
        raise ConfigError("gamma must be positive")
    tau = 2.0 * d / SPEED_OF_LIGHT
    if not 0 <= tau < n_fft / (2.0 * sample_rate_hz):
        raise ConfigError(f"round-trip delay {tau:g} s outside the half window of {n_fft} samples")

    freqs = np.fft.fftfreq(n_fft, d=1.0 / sample_rate_hz)
    template = _template_spectrum(w, freqs, sample_rate_hz)
    echo = template * np.exp(-2j * np.pi * freqs * tau)
    noise_std = 0.0 if math.isinf(gamma) else math.sqrt(sample_rate_hz / gamma / 2.0)

    estimates = np.empty(n_trials)
    for start in range(0, n_trials, TRIAL_CHUNK):
        count = min(TRIAL_CHUNK, n_trials - start)
        received = np.tile(echo, (count, 1))
        if noise_std > 0:
            noise = noise_std * (
                rng.standard_normal((count, n_fft)) + 1j * rng.standard_normal((count, n_fft))
            )
            received = received + np.fft.fft(noise, axis=1)
        cross = received * np.conj(template)[None, :]
        correlation = np.real(np.fft.ifft(cross, axis=1))
        coarse = np.argmax(correlation, axis=1).astype(float)
        coarse = np.where(coarse >= n_fft / 2, coarse - n_fft, coarse)
        lags = _refine_peaks(cross, freqs, coarse, sample_rate_hz)
        estimates[start : start + count] = SPEED_OF_LIGHT * (lags / sample_rate_hz) / 2.0

    bias = float(estimates.mean() - d)
    variance = float(estimates.var(ddof=1))
    logger.debug(f"ToA d={d} m gamma={gamma:g}: bias={bias:.3e} m, var={variance:.3e} m^2")
    return ToaSimulation(bias=bias, variance=variance, estimates=estimates)
