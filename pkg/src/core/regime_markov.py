"""Probabilities of the eight regime/reliability states and the memoryless transition matrix.

States pair the true regime with the decided regime and with whether the scheduled
rate stays within the true capacity:

    S1 NF->NF reliable      S2 NF->NF outage
    S3 NF->FF reliable      S4 NF->FF outage  (empty)
    S5 FF->NF reliable      S6 FF->NF outage  (S5 empty)
    S7 FF->FF reliable      S8 FF->FF outage
"""

import logging
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Optional

import numpy as np

from src.core.errors import DomainError
from src.core.numerics import QuadratureSettings, integrate_1d, q_function, std_normal_cdf
from src.core.params import (
    ProbMode,
    SystemParams,
    fraunhofer_distance,
    regime_priors,
    require_decision_at_boundary,
    validate,
)
from src.core.ranging import boundary_points

logger = logging.getLogger(__name__)


class StateId(IntEnum):
    S1 = 1
    S2 = 2
    S3 = 3
    S4 = 4
    S5 = 5
    S6 = 6
    S7 = 7
    S8 = 8

    @property
    def is_near(self) -> bool:
        """True regime of the state is NF."""
        return self.value <= 4

    @property
    def is_empty(self) -> bool:
        return self in (StateId.S4, StateId.S5)

    @property
    def is_outage(self) -> bool:
        return self in (StateId.S2, StateId.S4, StateId.S6, StateId.S8)


NEAR_STATES = (StateId.S1, StateId.S2, StateId.S3, StateId.S4)
FAR_STATES = (StateId.S5, StateId.S6, StateId.S7, StateId.S8)
RELIABLE_STATES = (StateId.S1, StateId.S3, StateId.S7)

STATE_LABELS = {
    StateId.S1: "correctly classified NF and reliable transmission",
    StateId.S2: "correctly classified NF but transmission outage",
    StateId.S3: "NF UT misclassified as FF but reliable transmission",
    StateId.S4: "NF UT misclassified as FF and in outage",
    StateId.S5: "FF UT misclassified as NF but reliable transmission",
    StateId.S6: "FF UT misclassified as NF and in outage",
    StateId.S7: "correctly classified FF and reliable transmission",
    StateId.S8: "correctly classified FF but transmission outage",
}


@dataclass
class StateDistribution:
    """Unconditional probabilities of S1..S8 (index 0 holds S1)."""

    probs: np.ndarray
    mode: ProbMode
    pre_normalization_sum: float
    # Integral of Pr(S_i | d) against the regime-conditional density, per state
    regime_mass: np.ndarray = field(repr=False)

    def prob(self, state: StateId) -> float:
        return float(self.probs[state - 1])

    @property
    def outage_probability(self) -> float:
        return float(sum(self.prob(s) for s in StateId if s.is_outage))


@dataclass
class TransitionMatrix:
    """8x8 row-stochastic matrix whose rows all equal the state distribution."""

    matrix: np.ndarray


def _sigma(params: SystemParams) -> float:
    require_decision_at_boundary(params)
    if params.sigma_d_m <= 0:
        raise DomainError("state probabilities require sigma_d > 0")
    return params.sigma_d_m


def state_prob_cond(state: StateId, d, params: SystemParams, mode: Optional[ProbMode] = None):
    """Pr(S_i | d) under the truncated-Gaussian ranging law.

    S7 depends on the mode: the printed formula Pr(d_hat >= d_F)/Pr(d_hat >= 0) in
    PaperLiteral mode, the consistent Pr(d_hat >= d)/Pr(d_hat >= 0) otherwise.
    """
    state = StateId(state)
    mode = ProbMode(mode or params.prob_mode)
    sigma = _sigma(params)
    d_f = fraunhofer_distance(params)
    d_arr = np.asarray(d, dtype=float)

    if state.is_near and np.any(d_arr >= d_f):
        raise DomainError(f"{state.name} is an NF state; requires d < d_F")
    if not state.is_near and np.any(d_arr < d_f):
        raise DomainError(f"{state.name} is an FF state; requires d >= d_F")

    mass = std_normal_cdf(d_arr / sigma)
    to_boundary = (d_f - d_arr) / sigma

    if state.is_empty:
        values = np.zeros_like(d_arr)
    elif state == StateId.S1:
        values = (std_normal_cdf(to_boundary) - 0.5) / mass
    elif state == StateId.S2:
        values = (mass - 0.5) / mass
    elif state == StateId.S3:
        values = q_function(to_boundary) / mass
    elif state == StateId.S6:
        values = (std_normal_cdf(to_boundary) - std_normal_cdf(-d_arr / sigma)) / mass
    elif state == StateId.S7:
        if mode == ProbMode.PAPER_LITERAL:
            values = q_function(to_boundary) / mass
        else:
            values = 0.5 / mass
    else:  # S8
        values = (0.5 - std_normal_cdf(to_boundary)) / mass

    return float(values) if d_arr.ndim == 0 else np.asarray(values, dtype=float)


def regime_density(d, params: SystemParams, near: bool):
    """Regime-conditional radial density 2d/(d_F^2 - d_min^2) or 2d/(d_max^2 - d_F^2)."""
    d_f = fraunhofer_distance(params)
    if near:
        span = d_f**2 - params.d_min_m**2
    else:
        span = params.d_max_m**2 - d_f**2
    return 2.0 * np.asarray(d, dtype=float) / span


def regime_interval(params: SystemParams, near: bool) -> tuple[float, float]:
    d_f = fraunhofer_distance(params)
    return (params.d_min_m, d_f) if near else (d_f, params.d_max_m)


def conditional_state_mass(
    state: StateId,
    params: SystemParams,
    mode: Optional[ProbMode] = None,
    settings: Optional[QuadratureSettings] = None,
) -> float:
    """Integral of Pr(S_i | d) against the regime-conditional density."""
    state = StateId(state)
    if state.is_empty:
        return 0.0
    lo, hi = regime_interval(params, state.is_near)
    return integrate_1d(
        lambda d: state_prob_cond(state, d, params, mode) * regime_density(d, params, state.is_near),
        lo,
        hi,
        settings,
        points=boundary_points(params, -1 if state.is_near else +1),
    ).value


def state_distribution(
    params: SystemParams, settings: Optional[QuadratureSettings] = None
) -> StateDistribution:
    """Unconditional state probabilities in the configured ProbMode.

    PaperLiteral: each regime-conditional average carries a 1/4 prefactor and the
    vector is renormalized afterwards. GeometricPrior: the prefactors are the
    area priors Pr(H0), Pr(H1) and no renormalization is applied.
    """
    validate(params)
    mode = params.prob_mode
    mass = np.array([conditional_state_mass(s, params, mode, settings) for s in StateId])

    if mode == ProbMode.PAPER_LITERAL:
        raw = 0.25 * mass
    else:
        prior_near, prior_far = regime_priors(params)
        weights = np.array([prior_near if s.is_near else prior_far for s in StateId])
        raw = weights * mass

    pre_sum = float(raw.sum())
    probs = raw / pre_sum if mode == ProbMode.PAPER_LITERAL else raw
    logger.debug(f"State distribution ({mode.value}): raw sum {pre_sum:.12f}")
    return StateDistribution(
        probs=probs,
        mode=mode,
        pre_normalization_sum=pre_sum,
        regime_mass=mass,
    )


def transition_matrix(dist: StateDistribution) -> TransitionMatrix:
    """Identical-row transition matrix of the memoryless chain."""
    return TransitionMatrix(matrix=np.tile(np.asarray(dist.probs, dtype=float), (len(StateId), 1)))


def s7_discrepancy(params: SystemParams, settings: Optional[QuadratureSettings] = None) -> float:
    """Printed S7 probability minus the consistent one, both weighted by the FF prior.

    Positive whenever sigma_d > 0: the printed formula also counts d_F <= d_hat < d,
    which belongs to S8.
    """
    literal = conditional_state_mass(StateId.S7, params, ProbMode.PAPER_LITERAL, settings)
    consistent = conditional_state_mass(StateId.S7, params, ProbMode.GEOMETRIC_PRIOR, settings)
    _, prior_far = regime_priors(params)
    return prior_far * (literal - consistent)
