"""Tests for system parameters and the NF/FF boundary."""

import pytest
from pydantic import ValidationError

from src.core.errors import DomainError, ParameterError
from src.core.params import (
    DEFAULT_WAVELENGTH,
    SPEED_OF_LIGHT,
    SystemParams,
    decides_at_boundary,
    decision_threshold,
    fraunhofer_distance,
    near_field_limit,
    regime_priors,
    require_decision_at_boundary,
    validate,
    with_decision_threshold,
    with_fraunhofer,
)


class TestDefaults:
    """Default configuration and derived geometry."""

    def test_wavelength_is_28_ghz(self):
        assert DEFAULT_WAVELENGTH == pytest.approx(SPEED_OF_LIGHT / 28e9, rel=1e-15)

    def test_fraunhofer_distance(self, params):
        # 2 * 100 lambda * 25 lambda / lambda = 5000 lambda
        assert fraunhofer_distance(params) == pytest.approx(53.5343675, rel=1e-9)

    def test_near_field_limit_is_twice_boundary(self, params):
        assert near_field_limit(params) == pytest.approx(2 * fraunhofer_distance(params), rel=1e-15)

    def test_regime_priors(self, params):
        d_f = fraunhofer_distance(params)
        p_near, p_far = regime_priors(params)
        assert p_near == pytest.approx((d_f**2 - 1.0) / (500.0**2 - 1.0), rel=1e-12)
        assert p_near + p_far == pytest.approx(1.0, abs=1e-15)

    def test_noise_psd_overrides_snr(self):
        params = SystemParams(tx_power_w=2.0, noise_psd=1e-3)
        assert params.rho == pytest.approx(2000.0)
        assert SystemParams().rho == SystemParams().snr


class TestValidate:
    """Invariant checks."""

    def test_defaults_are_valid(self, params):
        assert validate(params) is params

    def test_idempotent(self, params):
        assert validate(validate(params)) == validate(params)

    @pytest.mark.parametrize(
        "update,field",
        [
            ({"sigma_d_m": -1.0}, "sigma_d_m"),
            ({"aperture_tx_m": 0.1}, "aperture_tx_m"),
            ({"d_max_m": 0.5}, "d_max_m"),
            ({"d_min_m": 0.0}, "d_min_m"),
            ({"theta": 0.0}, "theta"),
            ({"d_max_m": 50.0}, "d_max_m"),
            ({"snr": float("nan")}, "snr"),
            ({"noise_psd": float("nan")}, "noise_psd"),
            ({"noise_psd": float("inf")}, "noise_psd"),
            ({"noise_psd": -1.0}, "noise_psd"),
        ],
    )
    def test_rejects(self, params, update, field):
        with pytest.raises(ParameterError) as exc_info:
            validate(params.model_copy(update=update))
        assert exc_info.value.field == field

    def test_zero_sigma_is_valid(self, params):
        validate(params.model_copy(update={"sigma_d_m": 0.0}))

    def test_frozen(self, params):
        with pytest.raises(ValidationError):
            params.sigma_d_m = 3.0

    def test_unknown_field(self):
        with pytest.raises(ValidationError):
            SystemParams(sigma=3.0)


class TestWithFraunhofer:
    """Rescaling L_t to a requested boundary."""

    def test_hits_requested_boundary(self, params):
        moved = with_fraunhofer(params, 100.0)
        assert fraunhofer_distance(moved) == pytest.approx(100.0, rel=1e-12)
        assert moved.aperture_rx_m == params.aperture_rx_m
        assert moved.wavelength_m == params.wavelength_m

    def test_rejects_aperture_ordering(self, params):
        # L_t = 10 lambda / 50 < L_r = 25 lambda
        with pytest.raises(ParameterError):
            with_fraunhofer(params, 10.0)


class TestDecisionThreshold:
    """Moving the scheduler's NF/FF switch at fixed apertures."""

    def test_defaults_to_boundary(self, params):
        assert decision_threshold(params) == fraunhofer_distance(params)
        assert decides_at_boundary(params)
        require_decision_at_boundary(params)

    def test_moves_only_the_switch(self, params):
        moved = with_decision_threshold(params, 80.0)
        assert decision_threshold(moved) == 80.0
        assert fraunhofer_distance(moved) == fraunhofer_distance(params)
        assert moved.aperture_tx_m == params.aperture_tx_m
        assert not decides_at_boundary(moved)
        with pytest.raises(DomainError):
            require_decision_at_boundary(moved)

    def test_threshold_at_boundary_keeps_state_model(self, params):
        require_decision_at_boundary(with_decision_threshold(params, fraunhofer_distance(params)))

    @pytest.mark.parametrize("threshold", [0.5, 600.0, 110.0, float("nan")])
    def test_rejects(self, params, threshold):
        # 110 m lies past 2 d_F, where the NF law is undefined
        with pytest.raises(ParameterError) as exc_info:
            with_decision_threshold(params, threshold)
        assert exc_info.value.field == "decision_threshold_m"
