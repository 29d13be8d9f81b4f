"""
Tests for the reproducible Wiener records.
"""

import numpy as np
import pytest
from scipy import stats

from qfilter.errors import InvalidParameter, ShapeMismatch
from qfilter.noise import (
    NoiseKind,
    NoisePath,
    coarsen,
    derive_seed,
    innovation_to_output,
    load_path_csv,
    output_to_innovation,
    save_path_csv,
    wiener_path,
)


# =============================================================================
# Sampling
# =============================================================================


class TestWienerPath:

    def test_deterministic_in_seed(self):
        a = wiener_path(1e-3, 500, 1, seed=42)
        b = wiener_path(1e-3, 500, 1, seed=42)
        np.testing.assert_array_equal(a.increments, b.increments)

    def test_different_seeds_differ(self):
        a = wiener_path(1e-3, 500, 1, seed=42)
        b = wiener_path(1e-3, 500, 1, seed=43)
        assert not np.array_equal(a.increments, b.increments)

    def test_shape_and_kind(self):
        path = wiener_path(0.01, 100, 3, seed=1)
        assert path.increments.shape == (100, 3)
        assert path.kind is NoiseKind.INNOVATION
        assert path.t_end == pytest.approx(1.0)
        np.testing.assert_allclose(path.times()[:3], [0.0, 0.01, 0.02])

    def test_increments_read_only(self):
        path = wiener_path(0.01, 10, 1, seed=1)
        with pytest.raises(ValueError):
            path.increments[0, 0] = 1.0

    def test_standard_normal_after_scaling(self):
        """Kolmogorov-Smirnov against N(0, 1) for dQ / sqrt(dt) at significance 0.001."""
        dt = 1e-3
        path = wiener_path(dt, 100000, 1, seed=2024)
        result = stats.kstest(path.increments[:, 0] / np.sqrt(dt), "norm")
        assert result.pvalue > 1e-3

    def test_mean_and_variance(self):
        dt, n = 0.01, 1000000
        path = wiener_path(dt, n, 1, seed=7)
        increments = path.increments[:, 0]
        assert abs(np.mean(increments)) < 4.0 * np.sqrt(dt / n)
        assert np.var(increments) == pytest.approx(dt, rel=0.01)

    def test_components_uncorrelated(self):
        dt, n = 0.01, 100000
        path = wiener_path(dt, n, 3, seed=11)
        cov = np.cov(path.increments.T)
        off_diagonal = cov[~np.eye(3, dtype=bool)]
        assert np.max(np.abs(off_diagonal)) < 4.0 * dt / np.sqrt(n)

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"dt": 0.0, "n_steps": 10, "dim": 1, "seed": 1},
            {"dt": 0.1, "n_steps": 0, "dim": 1, "seed": 1},
            {"dt": 0.1, "n_steps": 10, "dim": 2, "seed": 1},
            {"dt": 0.1, "n_steps": 10, "dim": 1, "seed": -1},
        ],
    )
    def test_invalid_arguments(self, kwargs):
        with pytest.raises(InvalidParameter):
            wiener_path(**kwargs)

    def test_output_kind_is_derived_not_sampled(self):
        with pytest.raises(InvalidParameter):
            wiener_path(0.1, 10, 1, seed=1, kind=NoiseKind.OUTPUT)

    def test_prior_kind(self):
        path = wiener_path(0.1, 10, 1, seed=1, kind=NoiseKind.PRIOR)
        assert path.kind is NoiseKind.PRIOR
        # same generator contract as an innovation path
        np.testing.assert_array_equal(path.increments, wiener_path(0.1, 10, 1, seed=1).increments)


# =============================================================================
# Seeds and coarsening
# =============================================================================


class TestSeedsAndCoarsening:

    def test_derive_seed_deterministic_and_distinct(self):
        seeds = [derive_seed(42, i) for i in range(100)]
        assert seeds == [derive_seed(42, i) for i in range(100)]
        assert len(set(seeds)) == 100
        assert derive_seed(42, 0) != derive_seed(43, 0)
        assert all(0 <= s < 2 ** 64 for s in seeds)

    def test_derive_seed_rejects_negative(self):
        with pytest.raises(InvalidParameter):
            derive_seed(-1, 0)

    def test_coarsen_sums_increments(self):
        path = wiener_path(1e-3, 12, 1, seed=5)
        coarse = coarsen(path, 4)
        assert coarse.n_steps == 3
        assert coarse.dt == pytest.approx(4e-3)
        np.testing.assert_allclose(coarse.increments[:, 0], path.increments[:, 0].reshape(3, 4).sum(axis=1))

    def test_coarsen_requires_divisor(self):
        with pytest.raises(ShapeMismatch):
            coarsen(wiener_path(1e-3, 10, 1, seed=5), 3)


# =============================================================================
# Innovation <-> output
# =============================================================================


class TestOutputRecord:

    def test_output_adds_position_signal(self, unit_params):
        path = wiener_path(0.01, 4, 1, seed=3)
        qhat = np.array([0.0, 1.0, -2.0, 0.5])
        output = innovation_to_output(path, qhat, unit_params)
        assert output.kind is NoiseKind.OUTPUT
        expected = path.increments[:, 0] + np.sqrt(2.0) * qhat * 0.01
        np.testing.assert_allclose(output.increments[:, 0], expected, rtol=1e-15)

    def test_inverse(self, unit_params):
        path = wiener_path(0.01, 50, 1, seed=3)
        qhat = np.linspace(-1.0, 1.0, 50)
        back = output_to_innovation(innovation_to_output(path, qhat, unit_params), qhat, unit_params)
        assert back.kind is NoiseKind.INNOVATION
        np.testing.assert_allclose(back.increments, path.increments, atol=1e-15)

    def test_shape_mismatch(self, unit_params):
        path = wiener_path(0.01, 5, 1, seed=3)
        with pytest.raises(ShapeMismatch):
            innovation_to_output(path, np.zeros(4), unit_params)

    def test_wrong_kind(self, unit_params):
        path = wiener_path(0.01, 5, 1, seed=3)
        with pytest.raises(InvalidParameter):
            output_to_innovation(path, np.zeros(5), unit_params)


# =============================================================================
# CSV dump / restore
# =============================================================================


class TestPathCsv:

    def test_restores_exact_values(self, tmp_path):
        path = wiener_path(1e-3, 200, 3, seed=9)
        file_path = save_path_csv(path, tmp_path / "noise.csv")
        assert file_path.read_text().splitlines()[0] == "step,dQ_1,dQ_2,dQ_3"
        restored = load_path_csv(file_path, dt=1e-3, seed=9)
        assert isinstance(restored, NoisePath)
        np.testing.assert_array_equal(restored.increments, path.increments)
        assert restored.dim == 3
