"""Special functions and adaptive quadrature used by the analytical modules."""

import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Iterable, Optional

import numpy as np
from scipy import integrate
from scipy.special import ndtr, roots_legendre

from src.config import get_settings
from src.core.errors import QuadratureError
from src.metrics import quadrature_failures_total

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class QuadratureSettings:
    """Tolerances for the adaptive Gauss–Kronrod evaluator."""

    rel_tol: float = 1e-9
    abs_tol: float = 1e-12
    max_subdivisions: int = 200

    def __post_init__(self):
        if self.rel_tol <= 0 or self.abs_tol <= 0:
            raise ValueError("quadrature tolerances must be positive")
        if self.max_subdivisions < 1:
            raise ValueError("max_subdivisions must be >= 1")

    @classmethod
    def from_settings(cls) -> "QuadratureSettings":
        settings = get_settings()
        return cls(
            rel_tol=settings.quad_rel_tol,
            abs_tol=settings.quad_abs_tol,
            max_subdivisions=settings.quad_max_subdivisions,
        )


@dataclass(frozen=True)
class QuadResult:
    """Quadrature value and its error estimate."""

    value: float
    error: float


def std_normal_cdf(x):
    """Standard normal CDF Phi(x)."""
    return ndtr(x)


def q_function(x):
    """Gaussian tail Q(x) = 1 - Phi(x), evaluated as Phi(-x) to avoid cancellation."""
    return ndtr(np.negative(x))


def gaussian_window(lo: float, hi: float, span: Optional[float] = None) -> Optional[tuple[float, float]]:
    """Clip a standardized interval to [-span, span]; None when nothing is left."""
    if span is None:
        span = get_settings().gaussian_span
    lo_c = max(lo, -span)
    hi_c = min(hi, span)
    if hi_c <= lo_c:
        return None
    return lo_c, hi_c


def integrate_1d(
    f: Callable[[float], float],
    a: float,
    b: float,
    settings: Optional[QuadratureSettings] = None,
    points: Optional[Iterable[float]] = None,
) -> QuadResult:
    """Adaptive estimate of the integral of f over [a, b].

    Args:
        f: Integrand, finite on [a, b]
        a, b: Bounds with a <= b
        settings: Tolerances (default from Settings)
        points: Optional interior breakpoints (kinks, steps)

    Raises:
        QuadratureError carrying the best estimate on non-convergence.
    """
    if settings is None:
        settings = QuadratureSettings.from_settings()
    if b < a:
        raise ValueError(f"integration bounds out of order: [{a}, {b}]")
    if b == a:
        return QuadResult(0.0, 0.0)

    interior = None
    if points is not None:
        interior = sorted({p for p in points if a < p < b})
        interior = interior or None

    result = integrate.quad(
        f,
        a,
        b,
        epsabs=settings.abs_tol,
        epsrel=settings.rel_tol,
        limit=settings.max_subdivisions,
        points=interior,
        full_output=1,
    )
    value, error = float(result[0]), float(result[1])
    if len(result) > 3:
        message = str(result[3]).strip().splitlines()[0]
        # Accept QUADPACK's roundoff warning when the error estimate still meets tolerance
        if error <= max(settings.abs_tol, settings.rel_tol * abs(value)) * 10:
            quadrature_failures_total.labels(outcome="accepted").inc()
            logger.debug(f"Quadrature warning on [{a}, {b}] within tolerance: {message}")
        else:
            quadrature_failures_total.labels(outcome="raised").inc()
            raise QuadratureError(message, value, error)
    if not math.isfinite(value):
        quadrature_failures_total.labels(outcome="raised").inc()
        raise QuadratureError("non-finite integral", value, error)
    return QuadResult(value, error)


@lru_cache(maxsize=8)
def _legendre_rule(order: int) -> tuple[np.ndarray, np.ndarray]:
    nodes, weights = roots_legendre(order)
    return nodes, weights


def integrate_panels(
    f: Callable[[np.ndarray], np.ndarray],
    a: float,
    b: float,
    points: Optional[Iterable[float]] = None,
    max_width: Optional[float] = None,
    order: int = 20,
) -> QuadResult:
    """Composite Gauss–Legendre rule with one vectorized call of f.

    [a, b] is cut at the interior `points` and then into panels no wider than
    `max_width`. The error estimate is the difference to the half-order rule on
    the same panels.
    """
    if b < a:
        raise ValueError(f"integration bounds out of order: [{a}, {b}]")
    if b == a:
        return QuadResult(0.0, 0.0)

    edges = [a, b]
    if points is not None:
        edges += [p for p in points if a < p < b]
    edges = np.unique(np.asarray(edges, dtype=float))
    if max_width is not None and max_width > 0:
        pieces = [
            np.linspace(lo, hi, int(math.ceil((hi - lo) / max_width)) + 1)[:-1]
            for lo, hi in zip(edges[:-1], edges[1:])
        ]
        edges = np.append(np.concatenate(pieces), b)

    lo, hi = edges[:-1], edges[1:]
    half, mid = 0.5 * (hi - lo), 0.5 * (hi + lo)

    def rule(n: int) -> float:
        nodes, weights = _legendre_rule(n)
        x = mid[:, None] + half[:, None] * nodes[None, :]
        values = np.asarray(f(x.ravel()), dtype=float).reshape(x.shape)
        return float(np.sum(half * (values @ weights)))

    value = rule(order)
    error = abs(value - rule(max(order // 2, 2)))
    if not math.isfinite(value):
        raise QuadratureError("non-finite integral", value, error)
    return QuadResult(value, error)


def integrate_2d(
    f: Callable[[float, float], float],
    outer: tuple[float, float],
    inner: Callable[[float], tuple[float, float]],
    settings: Optional[QuadratureSettings] = None,
    outer_points: Optional[Iterable[float]] = None,
    inner_points: Optional[Callable[[float], Iterable[float]]] = None,
    inner_width: Optional[Callable[[float], float]] = None,
    vectorized_inner: bool = False,
) -> QuadResult:
    """Nested estimate of the integral of f(x, y) for y in inner(x), x in outer.

    The outer integral is always adaptive. With `vectorized_inner`, f must accept an
    array of y values and the inner integral uses the composite panel rule (panels
    no wider than inner_width(x)); otherwise the inner integral is adaptive too.
    The inner error estimates are not propagated; the returned error is the outer one.
    """
    if settings is None:
        settings = QuadratureSettings.from_settings()

    def outer_integrand(x: float) -> float:
        lo, hi = inner(x)
        if hi <= lo:
            return 0.0
        pts = inner_points(x) if inner_points is not None else None
        if vectorized_inner:
            width = inner_width(x) if inner_width is not None else None
            return integrate_panels(lambda y: f(x, y), lo, hi, pts, width).value
        return integrate_1d(lambda y: f(x, y), lo, hi, settings, pts).value

    return integrate_1d(outer_integrand, outer[0], outer[1], settings, outer_points)


def standard_normal_pdf(t):
    return np.exp(-0.5 * np.square(t)) / math.sqrt(2.0 * math.pi)
