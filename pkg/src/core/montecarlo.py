"""Monte Carlo oracle for the analytical quantities and a queue simulator for the EC guarantee.

Slots are i.i.d.: each draws an area-uniform distance, a truncated-Gaussian
estimate, and receives the scheduled rate if it does not exceed the true capacity.
States are assigned from the region membership of (d, d_hat) and the actual rate
comparison, so empty or always-outage states are observed rather than assumed.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from src.config import get_settings
from src.core.capacity import SlotRates, service_rate, service_values
from src.core.ec_engine import effective_capacity
from src.core.errors import ConfigError, DomainError
from src.core.params import SystemParams, decides_at_boundary, decision_threshold, fraunhofer_distance, validate
from src.core.ranging import sample_distance, sample_estimate
from src.core.regime_markov import StateId
from src.metrics import mc_slots_simulated_total

logger = logging.getLogger(__name__)

N_STATES = len(StateId)
CI95_Z = 1.96
MIN_QUEUE_HORIZON = 100_000


@dataclass(frozen=True)
class McConfig:
    """Sample size, seed and batch count of one Monte Carlo run."""

    n_samples: int
    seed: int
    batches: int = 100

    def __post_init__(self):
        if self.n_samples < 1:
            raise ConfigError("n_samples must be >= 1")
        if self.batches < 1 or self.n_samples % self.batches:
            raise ConfigError(f"batches={self.batches} must divide n_samples={self.n_samples}")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")

    @property
    def batch_size(self) -> int:
        return self.n_samples // self.batches

    @classmethod
    def from_settings(cls, n_samples: Optional[int] = None, seed: Optional[int] = None) -> "McConfig":
        settings = get_settings()
        n = n_samples if n_samples is not None else settings.mc_samples
        batches = math.gcd(n, settings.mc_batches) if n >= 1 else 1
        return cls(n_samples=n, seed=seed if seed is not None else settings.mc_seed, batches=batches)


@dataclass(frozen=True)
class SlotOutcome:
    d: float
    d_hat: float
    state: StateId
    rates: SlotRates


@dataclass
class SlotBatch:
    """Vectorized outcomes of many slots."""

    d: np.ndarray
    d_hat: np.ndarray
    states: np.ndarray
    scheduled: np.ndarray
    capacity: np.ndarray
    service: np.ndarray

    def __len__(self) -> int:
        return len(self.d)


@dataclass
class McEstimate:
    value: float
    std_err: float
    ci95: tuple[float, float] = field(init=False)

    def __post_init__(self):
        half = CI95_Z * self.std_err
        self.ci95 = (self.value - half, self.value + half)

    def agrees_with(self, reference: float, multiplier: float = 3.0, floor: float = 1e-12) -> bool:
        """|value - reference| <= multiplier * SE (SE floored to absorb a zero-variance estimate)."""
        return abs(self.value - reference) <= multiplier * max(self.std_err, floor)


def assign_states(d, d_hat, scheduled, capacity, d_f: float, threshold: Optional[float] = None) -> np.ndarray:
    """State index 1..8 from true regime, decided regime and rate comparison.

    The decision compares d_hat with `threshold`, which defaults to d_f.
    """
    true_far = np.asarray(d) >= d_f
    decided_far = np.asarray(d_hat) >= (d_f if threshold is None else threshold)
    outage = np.asarray(scheduled) > np.asarray(capacity)
    return 1 + 4 * true_far.astype(int) + 2 * decided_far.astype(int) + outage.astype(int)


def simulate_slot(params: SystemParams, rng: np.random.Generator) -> SlotOutcome:
    """One slot of the ranging/scheduling process."""
    d = sample_distance(params.d_min_m, params.d_max_m, rng)
    d_hat = sample_estimate(d, params.sigma_d_m, rng)
    rates = service_rate(d, d_hat, params)
    state = assign_states(
        d,
        d_hat,
        rates.scheduled_rate,
        rates.true_capacity,
        fraunhofer_distance(params),
        decision_threshold(params),
    )
    return SlotOutcome(d=d, d_hat=d_hat, state=StateId(int(state)), rates=rates)


def simulate_slots(params: SystemParams, n: int, rng: np.random.Generator) -> SlotBatch:
    """n independent slots in one vectorized pass."""
    d = sample_distance(params.d_min_m, params.d_max_m, rng, size=n)
    d_hat = sample_estimate(d, params.sigma_d_m, rng)
    scheduled, capacity, service = service_values(d, d_hat, params)
    states = assign_states(
        d, d_hat, scheduled, capacity, fraunhofer_distance(params), decision_threshold(params)
    )
    mc_slots_simulated_total.inc(n)
    return SlotBatch(d=d, d_hat=d_hat, states=states, scheduled=scheduled, capacity=capacity, service=service)


@dataclass
class BatchStats:
    """Sufficient statistics of one batch."""

    n: int
    state_counts: np.ndarray
    false_far: int
    false_near: int
    service_sum: float
    service_sq_sum: float
    # Per theta: total deficit, its square, and per-state sums (shape (n_theta, 8))
    deficit_sum: np.ndarray
    deficit_sq_sum: np.ndarray
    state_deficit_sum: np.ndarray
    state_deficit_sq_sum: np.ndarray


def _batch_stats(
    params: SystemParams, seed: np.random.SeedSequence, n: int, thetas: Sequence[float]
) -> BatchStats:
    rng = np.random.default_rng(seed)
    batch = simulate_slots(params, n, rng)
    true_near = batch.d < fraunhofer_distance(params)
    decided_near = batch.d_hat < decision_threshold(params)

    theta_arr = np.asarray(thetas, dtype=float)
    deficits = -np.expm1(-theta_arr[:, None] * batch.service[None, :])
    one_hot = batch.states[None, :] == np.arange(1, N_STATES + 1)[:, None]

    return BatchStats(
        n=n,
        state_counts=one_hot.sum(axis=1),
        false_far=int(np.count_nonzero(true_near & ~decided_near)),
        false_near=int(np.count_nonzero(~true_near & decided_near)),
        service_sum=float(batch.service.sum()),
        service_sq_sum=float(np.square(batch.service).sum()),
        deficit_sum=deficits.sum(axis=1),
        deficit_sq_sum=np.square(deficits).sum(axis=1),
        state_deficit_sum=deficits @ one_hot.T,
        state_deficit_sq_sum=np.square(deficits) @ one_hot.T,
    )


def run_batches(
    params: SystemParams,
    mc: McConfig,
    thetas: Sequence[float] = (),
    workers: Optional[int] = None,
) -> list[BatchStats]:
    """Simulate every batch on its own seed substream; results come back in batch order."""
    validate(params)
    workers = workers or get_settings().mc_workers
    seeds = np.random.SeedSequence(mc.seed).spawn(mc.batches)
    logger.debug(f"Simulating {mc.n_samples} slots in {mc.batches} batches on {workers} workers")
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda s: _batch_stats(params, s, mc.batch_size, thetas), seeds))


def _slot_se(total: float, sq_total: float, n: int) -> float:
    """Standard error of a mean from its sum and sum of squares."""
    if n < 2:
        return 0.0
    mean = total / n
    variance = max(sq_total / n - mean * mean, 0.0) * n / (n - 1)
    return math.sqrt(variance / n)


def _binomial(count: int, n: int) -> McEstimate:
    p = count / n
    return McEstimate(p, math.sqrt(p * (1.0 - p) / n))


@dataclass
class McSummary:
    """Every oracle quantity from one set of simulated slots."""

    n_samples: int
    thetas: list[float]
    state_probs: list[McEstimate]
    state_counts: np.ndarray
    false_far: McEstimate
    false_near: McEstimate
    mean_service: McEstimate
    ec: dict[float, McEstimate]
    discount: dict[float, McEstimate]
    state_mgfs: dict[float, list[McEstimate]]


def _ec_estimate(stats: list[BatchStats], k: int, theta: float, n: int) -> tuple[McEstimate, McEstimate]:
    """EC and E[e^{-theta s}] for the k-th theta; SE by batch means and the delta method."""
    batch_means = np.array([s.deficit_sum[k] / s.n for s in stats])
    deficit = float(sum(s.deficit_sum[k] for s in stats) / n)
    if len(stats) >= 2:
        se = float(batch_means.std(ddof=1) / math.sqrt(len(stats)))
    else:
        se = _slot_se(deficit * n, float(sum(s.deficit_sq_sum[k] for s in stats)), n)
    ec = -math.log1p(-deficit) / theta
    return McEstimate(ec, se / (theta * (1.0 - deficit))), McEstimate(1.0 - deficit, se)


def summarize(
    params: SystemParams,
    mc: McConfig,
    thetas: Sequence[float] = (),
    workers: Optional[int] = None,
) -> McSummary:
    """Run the simulation once and reduce the batches in order."""
    thetas = [float(t) for t in thetas]
    for theta in thetas:
        if not theta > 0:
            raise DomainError(f"theta must be positive, got {theta}")
    stats = run_batches(params, mc, thetas, workers)
    n = sum(s.n for s in stats)
    counts = np.sum([s.state_counts for s in stats], axis=0)

    ec, discount, state_mgfs = {}, {}, {}
    for k, theta in enumerate(thetas):
        ec[theta], discount[theta] = _ec_estimate(stats, k, theta, n)
        per_state = []
        for i in range(N_STATES):
            count = int(counts[i])
            if count == 0:
                per_state.append(McEstimate(1.0, 0.0))
                continue
            total = float(sum(s.state_deficit_sum[k][i] for s in stats))
            sq_total = float(sum(s.state_deficit_sq_sum[k][i] for s in stats))
            per_state.append(McEstimate(1.0 - total / count, _slot_se(total, sq_total, count)))
        state_mgfs[theta] = per_state

    service_total = float(sum(s.service_sum for s in stats))
    service_sq = float(sum(s.service_sq_sum for s in stats))
    summary = McSummary(
        n_samples=n,
        thetas=thetas,
        state_probs=[_binomial(int(c), n) for c in counts],
        state_counts=counts,
        false_far=_binomial(sum(s.false_far for s in stats), n),
        false_near=_binomial(sum(s.false_near for s in stats), n),
        mean_service=McEstimate(service_total / n, _slot_se(service_total, service_sq, n)),
        ec=ec,
        discount=discount,
        state_mgfs=state_mgfs,
    )
    if decides_at_boundary(params) and (counts[StateId.S4 - 1] or counts[StateId.S5 - 1]):
        logger.warning(
            f"Observed {int(counts[StateId.S4 - 1])} S4 and {int(counts[StateId.S5 - 1])} S5 slots: "
            "the scheduled rate is not monotone in distance for this configuration"
        )
    return summary


def estimate_ec(params: SystemParams, theta: float, mc: McConfig) -> McEstimate:
    """EC_emp = -(1/theta) ln(mean e^{-theta s})."""
    return summarize(params, mc, [theta]).ec[float(theta)]


def estimate_state_probs(params: SystemParams, mc: McConfig) -> list[McEstimate]:
    return summarize(params, mc).state_probs


def estimate_error_probs(params: SystemParams, mc: McConfig) -> tuple[McEstimate, McEstimate]:
    """Joint frequencies of (NF user decided FF) and (FF user decided NF)."""
    summary = summarize(params, mc)
    return summary.false_far, summary.false_near


def estimate_state_mgfs(params: SystemParams, theta: float, mc: McConfig) -> list[McEstimate]:
    """Average of e^{-theta s} over the slots that fell in each state."""
    return summarize(params, mc, [theta]).state_mgfs[float(theta)]


def estimate_mean_service(params: SystemParams, mc: McConfig) -> McEstimate:
    return summarize(params, mc).mean_service


def estimate_conditional_mgf(
    state: StateId, d: float, theta: float, params: SystemParams, mc: McConfig
) -> McEstimate:
    """E[e^{-theta s} | S_i, d] from estimates drawn around a fixed true distance."""
    state = StateId(state)
    rng = np.random.default_rng(np.random.SeedSequence(mc.seed))
    d_hat = sample_estimate(d, params.sigma_d_m, rng, size=mc.n_samples)
    scheduled, capacity, service = service_values(np.full_like(d_hat, d), d_hat, params)
    states = assign_states(
        d, d_hat, scheduled, capacity, fraunhofer_distance(params), decision_threshold(params)
    )
    mc_slots_simulated_total.inc(mc.n_samples)

    accepted = service[states == state]
    if accepted.size == 0:
        return McEstimate(1.0, 0.0)
    deficits = -np.expm1(-theta * accepted)
    return McEstimate(
        1.0 - float(deficits.mean()),
        _slot_se(float(deficits.sum()), float(np.square(deficits).sum()), accepted.size),
    )


@dataclass
class QueueTailReport:
    """Empirical queue-length tail under constant arrivals."""

    theta: float
    arrival_fraction: float
    arrival_rate: float
    mean_service: float
    stable: bool
    max_queue: float
    mean_queue: float
    grid: np.ndarray
    tail: np.ndarray
    slope: float
    decay_bound_met: bool


def queue_tail(
    queue: np.ndarray, lower_quantile: float = 0.9, upper_quantile: float = 0.999, points: int = 30
):
    """Pr(Q > q) on a grid between two quantiles of Q and the fitted slope of its logarithm."""
    lo, hi = np.quantile(queue, [lower_quantile, upper_quantile])
    if hi <= lo:
        return np.array([]), np.array([]), -math.inf
    grid = np.linspace(lo, hi, points)
    ordered = np.sort(queue)
    tail = 1.0 - np.searchsorted(ordered, grid, side="right") / queue.size
    positive = tail > 0
    if positive.sum() < 2:
        return grid, tail, -math.inf
    slope = float(np.polyfit(grid[positive], np.log(tail[positive]), 1)[0])
    return grid, tail, slope


def lindley_queue(arrival: float, service: np.ndarray) -> np.ndarray:
    """Q_{k+1} = max(Q_k + a - s_k, 0) from Q_0 = 0, as a reflected random walk."""
    walk = np.cumsum(arrival - service)
    return walk - np.minimum(np.minimum.accumulate(walk), 0.0)


def queue_delay_validation(
    params: SystemParams,
    theta: float,
    arrival_fraction: float,
    horizon: int,
    rng: np.random.Generator,
    ec: Optional[float] = None,
) -> QueueTailReport:
    """Feed a constant arrival a = arrival_fraction * EC(theta) through the slot service.

    The EC guarantee holds when the fitted log-tail slope is at most -0.9 theta.
    """
    if arrival_fraction < 0:
        raise ConfigError("arrival_fraction must be non-negative")
    if horizon < MIN_QUEUE_HORIZON:
        raise ConfigError(f"horizon must be >= {MIN_QUEUE_HORIZON}")
    if not theta > 0:
        raise DomainError(f"theta must be positive, got {theta}")
    if ec is None:
        ec = effective_capacity(theta, params, diagnostics=False).ec_bits_per_use

    arrival = arrival_fraction * ec
    service = simulate_slots(params, horizon, rng).service
    mean_service = float(service.mean())
    stable = arrival < mean_service
    queue = lindley_queue(arrival, service)

    if arrival == 0:
        grid, tail, slope = np.array([]), np.array([]), -math.inf
    elif not stable:
        grid, tail, slope = np.array([]), np.array([]), math.nan
    else:
        grid, tail, slope = queue_tail(queue)

    report = QueueTailReport(
        theta=theta,
        arrival_fraction=arrival_fraction,
        arrival_rate=arrival,
        mean_service=mean_service,
        stable=stable,
        max_queue=float(queue.max()),
        mean_queue=float(queue.mean()),
        grid=grid,
        tail=tail,
        slope=slope,
        decay_bound_met=bool(stable and slope <= -0.9 * theta),
    )
    logger.info(
        f"Queue a={arrival:.4f} (x{arrival_fraction:g} EC), mean s={mean_service:.4f}, "
        f"stable={stable}, tail slope={slope:.5f}"
    )
    return report
