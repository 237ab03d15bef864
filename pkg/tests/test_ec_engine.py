"""Tests for per-state MGFs and the effective-capacity assembly."""

import math

import numpy as np
import pytest

from src.core.capacity import true_capacity
from src.core.ec_engine import (
    direct_effective_capacity,
    effective_capacity,
    effective_capacity_spectral,
    expected_discount,
    ff_upper_limit_gap,
    mean_service_rate,
    mgf_state,
    mgf_state_cond,
    spectral_radius,
    state_mgfs,
)
from src.core.errors import ConvergenceError, DomainError, ModeMismatchError
from src.core.montecarlo import summarize
from src.core.numerics import integrate_1d
from src.core.params import FfUpperLimit, MgfMode, ProbMode, fraunhofer_distance, with_decision_threshold
from src.core.ranging import annulus_density
from src.core.regime_markov import StateId, state_distribution


class TestConditionalMgf:
    def test_outage_states_are_one(self, params):
        assert mgf_state_cond(StateId.S2, 30.0, 0.01, params) == 1.0
        assert mgf_state_cond(StateId.S8, 100.0, 0.01, params) == 1.0
        assert mgf_state_cond(StateId.S4, 30.0, 0.01, params) == 1.0

    def test_reliable_state_in_unit_interval(self, params):
        value = mgf_state_cond(StateId.S1, 30.0, 0.01, params)
        assert 0.0 < value < 1.0

    def test_bounded_by_rates_of_region(self, params):
        # In S1 at d = 30 the scheduled rate lies between C(d_F-) and C(30)
        theta = 0.05
        value = mgf_state_cond(StateId.S1, 30.0, theta, params)
        assert math.exp(-theta * true_capacity(30.0, params)) <= value
        assert value <= math.exp(-theta * true_capacity(fraunhofer_distance(params) - 1e-9, params))

    def test_regime_mismatch(self, params):
        with pytest.raises(DomainError):
            mgf_state_cond(StateId.S7, 30.0, 0.01, params)

    def test_invalid_theta(self, params):
        with pytest.raises(DomainError):
            mgf_state_cond(StateId.S1, 30.0, 0.0, params)


class TestStateMgfs:
    def test_values_and_deficits_agree(self, params):
        mgfs = state_mgfs(0.01, params, state_distribution(params))
        np.testing.assert_allclose(mgfs.values + mgfs.deficits, 1.0, atol=1e-15)
        for state in StateId:
            if state.is_outage or state.is_empty:
                assert mgfs.value(state) == 1.0
            else:
                assert 0.0 < mgfs.value(state) < 1.0

    def test_reuses_distribution(self, params):
        with_dist = state_mgfs(0.01, params, state_distribution(params))
        assert mgf_state(StateId.S7, 0.01, params) == pytest.approx(with_dist.value(StateId.S7), rel=1e-10)


class TestEffectiveCapacity:
    def test_definitional_identity(self, params):
        result = effective_capacity(0.01, params, diagnostics=False)
        direct = expected_discount(0.01, params)
        assert result.log_mgf_sum == pytest.approx(direct, rel=1e-6)
        assert direct_effective_capacity(0.01, params) == pytest.approx(result.ec_bits_per_use, rel=1e-5)

    def test_nonincreasing_in_theta(self, params):
        dist = state_distribution(params)
        values = [
            effective_capacity(theta, params, diagnostics=False, dist=dist).ec_bits_per_use
            for theta in (1e-3, 1e-2, 1e-1, 1.0)
        ]
        assert all(b <= a for a, b in zip(values, values[1:]))
        assert values[-1] > 0

    def test_small_theta_tends_to_mean_service(self, params):
        ec = effective_capacity(1e-6, params, diagnostics=False).ec_bits_per_use
        assert ec == pytest.approx(mean_service_rate(params), rel=1e-3)

    @pytest.mark.parametrize("theta", [10.0, 1e3])
    def test_large_theta_bounded_by_outage(self, params, theta):
        # outage slots serve nothing, so E[e^{-theta s}] >= P_out
        result = effective_capacity(theta, params, diagnostics=False)
        bound = -math.log(result.state_probs.outage_probability) / theta
        assert result.ec_bits_per_use <= 1.05 * bound
        if theta == 1e3:
            assert result.ec_bits_per_use == pytest.approx(bound, rel=1e-4)

    def test_bounded_by_mean_service(self, params):
        ec = effective_capacity(0.1, params, diagnostics=False).ec_bits_per_use
        assert 0.0 < ec < mean_service_rate(params)

    def test_spectral_form_matches(self, params):
        for theta in (1e-3, 0.5):
            result = effective_capacity(theta, params, diagnostics=False)
            spectral = effective_capacity_spectral(theta, params, result=result)
            assert spectral == pytest.approx(result.ec_bits_per_use, abs=1e-10)

    def test_diagnostics(self, params):
        result = effective_capacity(0.01, params)
        assert result.s7_literal_surplus > 0
        assert result.ff_upper_limit_gap >= 0
        assert 0 < result.clamp_probability < 1e-3
        document = result.to_dict()
        assert document["prob_mode"] == "geometric_prior"
        assert set(document["mgfs"]) == {s.name for s in StateId}

    def test_mode_mismatch(self, params):
        mixed = params.model_copy(update={"prob_mode": ProbMode.PAPER_LITERAL})
        with pytest.raises(ModeMismatchError):
            effective_capacity(0.01, mixed)

    def test_rejects_zero_sigma(self, params):
        with pytest.raises(DomainError):
            effective_capacity(0.01, params.model_copy(update={"sigma_d_m": 0.0}))

    def test_rejects_nonpositive_theta(self, params):
        with pytest.raises(DomainError):
            effective_capacity(-0.01, params)

    def test_larger_sigma_lowers_ec(self, params):
        low = effective_capacity(0.01, params.model_copy(update={"sigma_d_m": 1.0}), diagnostics=False)
        high = effective_capacity(0.01, params.model_copy(update={"sigma_d_m": 10.0}), diagnostics=False)
        assert high.ec_bits_per_use < low.ec_bits_per_use


class TestPaperLiteral:
    def test_reproduction_mode(self, literal_params):
        result = effective_capacity(0.01, literal_params, diagnostics=False)
        assert math.isfinite(result.ec_bits_per_use)
        assert result.state_probs.probs.sum() == pytest.approx(1.0, abs=1e-14)
        assert result.pre_normalization_sum > 0.5
        assert result.mgfs.mode == MgfMode.PAPER_LITERAL

    def test_upper_limit_gap(self, literal_params):
        assert ff_upper_limit_gap(0.01, literal_params) > 0

    def test_extended_limit_changes_s7(self, literal_params):
        extended = literal_params.model_copy(update={"ff_mgf_upper": FfUpperLimit.EXTENDED})
        assert mgf_state(StateId.S7, 0.01, extended) > mgf_state(StateId.S7, 0.01, literal_params)


class TestSpectralRadius:
    def test_rank_one_matrix(self):
        weights = np.array([0.2, 0.3, 0.5])
        mgfs = np.array([0.9, 1.0, 0.7])
        matrix = np.tile(weights, (3, 1)) * mgfs[None, :]
        assert spectral_radius(matrix) == pytest.approx(float(weights @ mgfs), rel=1e-12)

    def test_invariant_under_state_relabelling(self, params):
        result = effective_capacity(0.05, params, diagnostics=False)
        probs = result.state_probs.probs
        matrix = np.tile(probs, (len(probs), 1)) * result.mgfs.values[None, :]
        order = np.random.default_rng(3).permutation(len(probs))
        relabelled = matrix[np.ix_(order, order)]
        assert spectral_radius(relabelled) == pytest.approx(spectral_radius(matrix), rel=1e-9)

    def test_non_convergence(self):
        # Period-2 permutation never settles from a non-uniform start
        matrix = np.array([[0.0, 2.0], [1.0, 0.0]])
        with pytest.raises(ConvergenceError):
            spectral_radius(matrix, max_iter=50)


class TestMeanService:
    def test_small_sigma_limit(self, params):
        # Underestimates cause outage half of the time as sigma_d -> 0
        tight = params.model_copy(update={"sigma_d_m": 1e-6})
        d_f = fraunhofer_distance(params)
        full = integrate_1d(
            lambda d: true_capacity(d, params) * annulus_density(d, params),
            params.d_min_m,
            params.d_max_m,
            points=[d_f],
        ).value
        assert mean_service_rate(tight) == pytest.approx(0.5 * full, rel=1e-3)

    def test_zero_sigma_is_true_capacity(self, params):
        exact = params.model_copy(update={"sigma_d_m": 0.0})
        d_f = fraunhofer_distance(params)
        full = integrate_1d(
            lambda d: true_capacity(d, params) * annulus_density(d, params),
            params.d_min_m,
            params.d_max_m,
            points=[d_f],
        ).value
        assert mean_service_rate(exact) == pytest.approx(full, rel=1e-9)


class TestDecisionThreshold:
    """Scheduler switch moved away from d_F at fixed apertures."""

    def test_state_model_refuses_moved_threshold(self, params):
        moved = with_decision_threshold(params, 80.0)
        with pytest.raises(DomainError):
            effective_capacity(0.01, moved)
        with pytest.raises(DomainError):
            state_distribution(moved)

    def test_threshold_at_boundary_matches_state_model(self, params):
        matched = with_decision_threshold(params, fraunhofer_distance(params))
        ec = effective_capacity(0.01, params, diagnostics=False).ec_bits_per_use
        assert direct_effective_capacity(0.01, matched) == pytest.approx(ec, rel=1e-5)

    def test_joint_law_agrees_with_simulation(self, params, small_mc):
        moved = with_decision_threshold(params, 80.0)
        estimate = summarize(moved, small_mc, [0.01]).ec[0.01]
        assert estimate.agrees_with(direct_effective_capacity(0.01, moved), 4.0)

    def test_ec_nonincreasing_in_threshold(self, params):
        # below d_F, FF scheduling of NF users avoids the underestimate outages;
        # above it, FF users in the band are promised the larger NF rate
        values = [
            direct_effective_capacity(0.01, with_decision_threshold(params, t))
            for t in (20.0, 40.0, 60.0, 80.0, 100.0)
        ]
        assert all(b < a for a, b in zip(values, values[1:]))
