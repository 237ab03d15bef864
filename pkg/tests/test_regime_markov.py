"""Tests for the eight-state regime/reliability model."""

import numpy as np
import pytest

from src.core.errors import DomainError
from src.core.params import ProbMode, fraunhofer_distance, regime_priors
from src.core.regime_markov import (
    FAR_STATES,
    NEAR_STATES,
    STATE_LABELS,
    StateId,
    conditional_state_mass,
    s7_discrepancy,
    state_distribution,
    state_prob_cond,
    transition_matrix,
)


class TestStateId:
    def test_classification(self):
        assert [s for s in StateId if s.is_empty] == [StateId.S4, StateId.S5]
        assert [s for s in StateId if s.is_outage] == [StateId.S2, StateId.S4, StateId.S6, StateId.S8]
        assert all(s.is_near for s in NEAR_STATES)
        assert not any(s.is_near for s in FAR_STATES)

    def test_every_state_labelled(self):
        assert set(STATE_LABELS) == set(StateId)


class TestConditionalProbabilities:
    def test_near_states_sum_to_one(self, params):
        d = np.array([1.0, 5.0, 20.0, 50.0])
        total = sum(state_prob_cond(s, d, params) for s in NEAR_STATES)
        np.testing.assert_allclose(total, 1.0, atol=1e-12)

    def test_far_states_sum_to_one(self, params):
        d = np.array([fraunhofer_distance(params), 60.0, 200.0, 500.0])
        total = sum(state_prob_cond(s, d, params) for s in FAR_STATES)
        np.testing.assert_allclose(total, 1.0, atol=1e-12)

    def test_printed_s7_overcounts(self, params):
        d = np.array([60.0, 200.0])
        total = sum(state_prob_cond(s, d, params, ProbMode.PAPER_LITERAL) for s in FAR_STATES)
        assert np.all(total > 1.0)

    def test_empty_states(self, params):
        assert state_prob_cond(StateId.S4, 20.0, params) == 0.0
        assert state_prob_cond(StateId.S5, 100.0, params) == 0.0

    def test_regime_mismatch(self, params):
        with pytest.raises(DomainError):
            state_prob_cond(StateId.S1, 100.0, params)
        with pytest.raises(DomainError):
            state_prob_cond(StateId.S7, 10.0, params)

    def test_zero_sigma(self, params):
        with pytest.raises(DomainError):
            state_prob_cond(StateId.S1, 10.0, params.model_copy(update={"sigma_d_m": 0.0}))


class TestStateDistribution:
    def test_geometric_prior_sums_to_one(self, params):
        dist = state_distribution(params)
        assert dist.probs.sum() == pytest.approx(1.0, abs=1e-8)
        assert dist.pre_normalization_sum == pytest.approx(1.0, abs=1e-8)
        prior_near, _ = regime_priors(params)
        near = sum(dist.prob(s) for s in NEAR_STATES)
        assert near == pytest.approx(prior_near, rel=1e-8)

    def test_empty_states_have_zero_probability(self, params):
        dist = state_distribution(params)
        assert dist.prob(StateId.S4) == 0.0
        assert dist.prob(StateId.S5) == 0.0

    def test_outage_probability(self, params):
        dist = state_distribution(params)
        reliable = dist.prob(StateId.S1) + dist.prob(StateId.S3) + dist.prob(StateId.S7)
        assert dist.outage_probability == pytest.approx(1.0 - reliable, abs=1e-8)

    def test_invariant_under_common_length_scaling(self, params):
        lengths = ("wavelength_m", "aperture_tx_m", "aperture_rx_m", "d_min_m", "d_max_m", "sigma_d_m")
        scaled = params.model_copy(update={name: 2.0 * getattr(params, name) for name in lengths})
        np.testing.assert_allclose(
            state_distribution(scaled).probs, state_distribution(params).probs, rtol=0.0, atol=1e-12
        )

    def test_misclassification_vanishes_with_sigma(self, params):
        dist = state_distribution(params.model_copy(update={"sigma_d_m": 1e-4}))
        assert dist.prob(StateId.S3) < 1e-6
        assert dist.prob(StateId.S6) < 1e-6
        prior_near, prior_far = regime_priors(params)
        # the estimate still falls short of the truth half of the time
        assert dist.prob(StateId.S2) == pytest.approx(prior_near / 2.0, rel=1e-3)
        assert dist.prob(StateId.S8) == pytest.approx(prior_far / 2.0, rel=1e-3)

    def test_paper_literal_renormalizes(self, literal_params):
        dist = state_distribution(literal_params)
        assert dist.probs.sum() == pytest.approx(1.0, abs=1e-14)
        # 1/4 of (near mass 1 + far mass 1 + S7 overcount)
        assert dist.pre_normalization_sum > 0.5
        near = sum(dist.prob(s) for s in NEAR_STATES)
        assert near < 0.5

    def test_conditional_mass_of_near_regime(self, params):
        total = sum(conditional_state_mass(s, params, ProbMode.GEOMETRIC_PRIOR) for s in NEAR_STATES)
        assert total == pytest.approx(1.0, abs=1e-9)


class TestTransitionMatrix:
    def test_identical_stochastic_rows(self, params):
        dist = state_distribution(params)
        matrix = transition_matrix(dist).matrix
        assert matrix.shape == (8, 8)
        for row in matrix:
            np.testing.assert_array_equal(row, dist.probs)
        np.testing.assert_allclose(matrix.sum(axis=1), 1.0, atol=1e-8)


class TestS7Discrepancy:
    def test_positive_and_shrinks_with_sigma(self, params):
        small = s7_discrepancy(params.model_copy(update={"sigma_d_m": 1.0}))
        large = s7_discrepancy(params.model_copy(update={"sigma_d_m": 10.0}))
        # Wider errors push more of d_F <= d_hat < d below the boundary
        assert 0.0 < large < small
