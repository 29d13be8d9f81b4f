"""
Tests for physical parameters and the Gaussian posterior state.
"""

import numpy as np
import pytest

from qfilter.errors import InvalidParameter, NonNormalizable
from qfilter.posterior import (
    ComplexWidth,
    GaussianPosterior,
    WaveCoefficient,
    as_omega,
    dispersions,
    forward_w,
    heisenberg_product,
    make_params,
    osmotic_velocity,
    posterior_density,
    reconstruct_qp,
)


# =============================================================================
# Parameters
# =============================================================================


class TestMakeParams:

    def test_valid(self):
        params = make_params(m=2.0, hbar=1.0, lam=0.5, dim=3)
        assert params.m == 2.0
        assert params.lam == 0.5
        assert params.dim == 3
        assert params.to_dict() == {"m": 2.0, "hbar": 1.0, "lambda": 0.5, "dim": 3}

    def test_lambda_zero_allowed(self):
        assert make_params(m=1.0, lam=0.0).lam == 0.0

    @pytest.mark.parametrize(
        "kwargs, field",
        [
            ({"m": 0.0}, "m"),
            ({"m": -1.0}, "m"),
            ({"m": 1.0, "hbar": 0.0}, "hbar"),
            ({"m": 1.0, "lam": -0.1}, "lambda"),
            ({"m": 1.0, "dim": 2}, "dim"),
            ({"m": float("nan")}, "m"),
        ],
    )
    def test_invalid_names_field(self, kwargs, field):
        with pytest.raises(InvalidParameter) as exc:
            make_params(**kwargs)
        assert exc.value.field == field
        assert exc.value.code == "INVALID_PARAMETER"


# =============================================================================
# Complex width
# =============================================================================


class TestComplexWidth:

    def test_positive_real_part(self):
        w = ComplexWidth(0.5 - 0.2j)
        assert w.real == 0.5
        assert w.imag == -0.2

    @pytest.mark.parametrize("value", [0.0, -1.0 + 1j, complex("nan")])
    def test_rejects_non_normalizable(self, value):
        with pytest.raises(NonNormalizable):
            ComplexWidth(value)
        with pytest.raises(NonNormalizable):
            as_omega(value)


# =============================================================================
# Dispersions
# =============================================================================


class TestDispersions:

    def test_stationary_width_values(self, unit_params):
        """At alpha = (1 - i)/sqrt(2): tau_q2 = tau_p2 = 1/sqrt(2)."""
        alpha = (1.0 - 1.0j) / np.sqrt(2.0)
        tau_q2, tau_p2 = dispersions(alpha, unit_params)
        assert tau_q2 == pytest.approx(np.sqrt(0.5), abs=1e-15)
        assert tau_p2 == pytest.approx(np.sqrt(0.5), abs=1e-15)

    def test_real_width_is_minimum_uncertainty(self, unit_params):
        assert heisenberg_product(0.5, unit_params) == pytest.approx(0.25, rel=1e-15)

    def test_heisenberg_bound(self):
        params = make_params(m=1.0, hbar=2.0)
        for omega in [0.3, 1 + 1j, 2 - 5j, 0.01 + 0.01j]:
            assert heisenberg_product(omega, params) >= params.hbar ** 2 / 4.0 * (1 - 1e-15)


# =============================================================================
# Coordinate maps
# =============================================================================


class TestCoordinateMaps:

    def test_forward_and_back(self):
        params = make_params(m=1.7, hbar=0.9, lam=1.0, dim=3)
        omega = 0.8 - 0.4j
        qhat = np.array([0.3, -1.2, 2.0])
        phat = np.array([1.0, 0.0, -0.5])
        w = forward_w(qhat, phat, omega, params)
        q_back, p_back = reconstruct_qp(w, omega, params)
        np.testing.assert_allclose(q_back, qhat, atol=1e-12)
        np.testing.assert_allclose(p_back, phat, atol=1e-12)

    def test_qhat_is_zero_of_real_osmotic_velocity(self, unit_params):
        omega = 0.6 - 0.3j
        w = forward_w(np.array([1.5]), np.array([0.7]), omega, unit_params)
        velocity = osmotic_velocity(w, omega, unit_params, np.array([1.5]))
        assert velocity.real[0] == pytest.approx(0.0, abs=1e-14)
        # the imaginary part at qhat is the current velocity phat / m
        assert velocity.imag[0] == pytest.approx(0.7, abs=1e-14)

    def test_wave_coefficient_is_read_only(self):
        w = WaveCoefficient(np.array([1 + 1j]))
        with pytest.raises(ValueError):
            w.w[0] = 0.0


# =============================================================================
# Posterior state
# =============================================================================


class TestGaussianPosterior:

    def test_scalar_phat_broadcast(self):
        state = GaussianPosterior(t=0.0, qhat=np.zeros(3), phat=1.0, omega=0.5)
        assert state.dim == 3
        np.testing.assert_array_equal(state.phat, np.ones(3))
        assert isinstance(state.omega, ComplexWidth)

    def test_vectors_are_read_only(self):
        state = GaussianPosterior(t=0.0, qhat=[0.0], phat=[0.0], omega=0.5)
        with pytest.raises(ValueError):
            state.qhat[0] = 1.0

    def test_component_mismatch(self):
        with pytest.raises(InvalidParameter):
            GaussianPosterior(t=0.0, qhat=np.zeros(3), phat=np.zeros(2), omega=0.5)

    def test_density_normalized_and_peaked(self):
        state = GaussianPosterior(t=0.0, qhat=[1.0], phat=[0.0], omega=0.7 - 0.2j)
        x = np.linspace(-15.0, 17.0, 20001)
        density = posterior_density(state, x)
        assert np.sum(density) * (x[1] - x[0]) == pytest.approx(1.0, abs=1e-10)
        assert x[np.argmax(density)] == pytest.approx(1.0, abs=2e-3)

    def test_density_three_dim(self):
        state = GaussianPosterior(t=0.0, qhat=[0.0, 0.0, 0.0], phat=[0.0, 0.0, 0.0], omega=0.5)
        # tau_q2 = 1, density at the mean is (2 pi)^(-3/2)
        value = posterior_density(state, np.zeros((1, 3)))
        assert value[0] == pytest.approx((2 * np.pi) ** -1.5, rel=1e-14)
