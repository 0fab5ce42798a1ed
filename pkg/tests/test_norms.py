"""Discrete Sobolev norms, Bochner aggregation, and the rate fitter."""

import math
import warnings

import numpy as np
import pytest

from gn3phase.errors import DegenerateDataError, TrajectoryError
from gn3phase.grid import make_grid
from gn3phase.norms import bochner, fit_rate, norm_h, norm_v, norm_vdual, norm_w

GRID = make_grid(1.0, 201)


class TestSpatialNorms:
    def test_h_of_constant_one(self):
        assert norm_h(GRID, np.ones(GRID.n)) == pytest.approx(1.0, rel=1e-12)
        assert norm_h(GRID, np.zeros(GRID.n)) == 0.0

    def test_h_of_cosine(self):
        u = np.cos(np.pi * GRID.x)
        assert norm_h(GRID, u) == pytest.approx(math.sqrt(0.5), rel=1e-4)

    def test_v_of_constant(self):
        assert norm_v(GRID, np.full(GRID.n, -2.0)) == pytest.approx(2.0, rel=1e-12)

    def test_v_of_linear(self):
        u = GRID.x.copy()
        assert norm_v(GRID, u) == pytest.approx(math.sqrt(4.0 / 3.0), rel=1e-4)

    def test_vdual_of_constant_one(self):
        assert norm_vdual(GRID, np.ones(GRID.n)) == pytest.approx(1.0, rel=1e-12)
        assert norm_vdual(GRID, np.zeros(GRID.n)) == 0.0

    def test_vdual_of_cosine(self):
        h = np.cos(np.pi * GRID.x)
        expected = math.sqrt(0.5 / (1.0 + np.pi**2))
        assert norm_vdual(GRID, h) == pytest.approx(expected, rel=1e-4)

    def test_w_of_constant(self):
        assert norm_w(GRID, np.full(GRID.n, 3.0)) == pytest.approx(3.0, rel=1e-12)

    def test_w_of_cosine(self):
        u = np.cos(np.pi * GRID.x)
        expected = math.sqrt(0.5 + np.pi**2 / 2.0 + np.pi**4 / 2.0)
        assert norm_w(GRID, u) == pytest.approx(expected, rel=1e-4)

    def test_ordering_on_sampled_fields(self):
        rng = np.random.default_rng(23)
        for _ in range(10):
            u = rng.standard_normal(GRID.n)
            vdual, h, v, w = (f(GRID, u) for f in (norm_vdual, norm_h, norm_v, norm_w))
            assert vdual <= h + 1e-9
            assert h <= v + 1e-9
            assert v <= w + 1e-9

    @pytest.mark.parametrize("norm", [norm_h, norm_v, norm_vdual, norm_w])
    def test_homogeneity(self, norm):
        rng = np.random.default_rng(29)
        u = rng.standard_normal(GRID.n)
        for c in (-3.0, 0.5, 7.25):
            assert norm(GRID, c * u) == pytest.approx(abs(c) * norm(GRID, u), rel=1e-12)

    @pytest.mark.parametrize("norm", [norm_h, norm_v, norm_vdual, norm_w])
    def test_triangle_inequality(self, norm):
        rng = np.random.default_rng(31)
        for _ in range(5):
            u = rng.standard_normal(GRID.n)
            v = rng.standard_normal(GRID.n)
            assert norm(GRID, u + v) <= norm(GRID, u) + norm(GRID, v) + 1e-9


class TestBochner:
    def test_constant_in_time_derivative_vanishes(self):
        fields = np.tile(np.cos(np.pi * GRID.x), (5, 1))
        assert bochner(GRID, fields, 0.1, "H", "W1infT") == 0.0
        assert bochner(GRID, fields, 0.1, "H", "H1T") == 0.0

    def test_linf_of_constant_one(self):
        fields = np.ones((4, GRID.n))
        assert bochner(GRID, fields, 0.25, "H", "LinfT") == pytest.approx(1.0, rel=1e-12)

    def test_unit_time_slope(self):
        tau = 0.125
        fields = np.array([np.full(GRID.n, m * tau) for m in range(9)])
        assert bochner(GRID, fields, tau, "H", "W1infT") == pytest.approx(1.0, rel=1e-12)

    def test_l2t_right_endpoint_rule(self):
        tau = 0.5
        fields = np.stack([np.zeros(GRID.n), np.ones(GRID.n), np.ones(GRID.n)])
        # tau * (1^2 + 1^2) = 1.0, the node at t=0 is not counted
        assert bochner(GRID, fields, tau, "H", "L2T") == pytest.approx(1.0, rel=1e-12)

    def test_needs_two_levels_for_derivatives(self):
        fields = np.ones((1, GRID.n))
        with pytest.raises(TrajectoryError):
            bochner(GRID, fields, 0.1, "H", "W1infT")

    def test_rejects_unknown_kinds(self):
        fields = np.ones((3, GRID.n))
        with pytest.raises(ValueError):
            bochner(GRID, fields, 0.1, "X", "LinfT")
        with pytest.raises(ValueError):
            bochner(GRID, fields, 0.1, "H", "supT")

    def test_rejects_wrong_shape(self):
        with pytest.raises(TrajectoryError):
            bochner(GRID, np.ones(GRID.n), 0.1, "H", "LinfT")


class TestFitRate:
    def test_exact_linear_power_law(self):
        c = 0.37
        fit = fit_rate([(0.1, 0.1 * c), (0.01, 0.01 * c), (0.001, 0.001 * c)])
        assert fit.slope == pytest.approx(1.0, abs=1e-12)
        assert fit.residual <= 1e-12

    def test_exact_square_root_power_law(self):
        c = 2.1
        fit = fit_rate([(0.04, 0.2 * c), (0.01, 0.1 * c), (0.0025, 0.05 * c)])
        assert fit.slope == pytest.approx(0.5, abs=1e-12)
        assert fit.residual <= 1e-12

    def test_noisy_linear_data_recovers_slope(self):
        rng = np.random.default_rng(41)
        alphas = np.logspace(-4, -1, 10)
        errors = 0.8 * alphas * (1.0 + 0.05 * rng.uniform(-1.0, 1.0, alphas.size))
        fit = fit_rate(list(zip(alphas, errors)))
        assert 0.9 <= fit.slope <= 1.1

    def test_zero_errors_excluded_with_warning(self):
        with pytest.warns(UserWarning, match="zero-error"):
            fit = fit_rate([(0.1, 0.1), (0.05, 0.05), (0.01, 0.01), (0.001, 0.0)])
        assert fit.n_used == 3
        assert fit.slope == pytest.approx(1.0, abs=1e-12)

    def test_all_zero_signals_degeneracy(self):
        with pytest.raises(DegenerateDataError):
            fit_rate([(0.1, 0.0), (0.01, 0.0), (0.001, 0.0)])

    def test_too_few_points(self):
        with pytest.raises(ValueError):
            fit_rate([(0.1, 1.0), (0.01, 0.1)])
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            with pytest.raises(DegenerateDataError):
                fit_rate([(0.1, 1.0), (0.01, 0.1), (0.001, 0.0), (0.0001, 0.0)])

    def test_rejects_bad_inputs(self):
        with pytest.raises(ValueError):
            fit_rate([(0.1, 1.0), (-0.01, 0.1), (0.001, 0.01)])
        with pytest.raises(ValueError):
            fit_rate([(0.1, 1.0), (0.01, -0.1), (0.001, 0.01)])
