import math

import numpy as np
import pytest

from qtelegraph import (ModelParams, StationaryDensity, analytic_exit_lower,
                        analytic_exit_upper, exit_time_bound, fp_residual,
                        gap_bound, log_unnormalized_density,
                        stationary_density, steady_state)


def make_params(g=0.6, t_decay=1.0, alpha=10.0):
    return ModelParams(g, t_decay, alpha, 1e-4)


def riemann_log_density(y, g, t_decay, alpha, n_panels=1_000_000):
    """Independent fixed-step midpoint-rule oracle for the log density."""
    q = (np.arange(n_panels) + 0.5) * (y / n_panels)
    u = -(1.0 + q) / t_decay + g * (1.0 - q)
    integral = np.sum(u / (1.0 - q * q) ** 2) * (y / n_panels)
    return -2.0 * math.log1p(-y * y) + 2.0 / alpha ** 2 * integral


class TestLogUnnormalizedDensity:
    def test_zero_point(self):
        assert log_unnormalized_density(0.0, make_params()) == 0.0

    def test_symmetry_at_balanced_pumping(self):
        # gT = 1 makes the drift odd, hence an even exponent
        p = make_params(g=1.0)
        for y in (0.3, 0.7, 0.95):
            assert log_unnormalized_density(y, p) == pytest.approx(
                log_unnormalized_density(-y, p), rel=1e-9)

    def test_against_riemann_oracle(self):
        p = make_params()
        rng = np.random.default_rng(42)
        for y in rng.uniform(-0.9, 0.9, 20):
            if abs(y) < 1e-3:
                continue
            oracle = riemann_log_density(y, 0.6, 1.0, 10.0)
            assert log_unnormalized_density(float(y), p) == pytest.approx(
                oracle, rel=1e-8, abs=1e-10)

    def test_domain_errors(self):
        with pytest.raises(ValueError):
            log_unnormalized_density(1.0, make_params())
        with pytest.raises(ValueError):
            log_unnormalized_density(0.5, ModelParams(0.6, 1.0, 0.0, 1e-4))


class TestStationaryDensity:
    @pytest.mark.parametrize("alpha", [0.05, 0.5, 2.0, 10.0])
    @pytest.mark.parametrize("gt", [0.25, 0.6, 1.0, 4.0])
    def test_matrix_normalization_and_positivity(self, alpha, gt):
        d = stationary_density(make_params(g=gt, alpha=alpha), n_grid=1024)
        assert np.trapezoid(d.rho, d.y) == pytest.approx(1.0, abs=1e-6)
        assert (d.rho >= 0).all()
        assert d.rho[0] < 1e-12 * d.rho.max()
        assert d.rho[-1] < 1e-12 * d.rho.max()

    def test_symmetric_at_balanced_pumping(self):
        d = stationary_density(make_params(g=1.0), n_grid=2048)
        assert np.abs(d.rho - d.rho[::-1]).max() < 1e-9 * d.rho.max()

    def test_bimodal_at_large_alpha(self):
        d = stationary_density(make_params(alpha=10.0), n_grid=4096)
        interior = (d.rho[1:-1] > d.rho[:-2]) & (d.rho[1:-1] > d.rho[2:])
        peaks = d.y[1:-1][interior]
        assert len(peaks) == 2
        assert abs(peaks[0] + 1) < 0.1 and abs(peaks[-1] - 1) < 0.1

    def test_unimodal_sharp_at_small_alpha(self):
        d = stationary_density(make_params(alpha=0.05), n_grid=4096)
        interior = (d.rho[1:-1] > d.rho[:-2]) & (d.rho[1:-1] > d.rho[2:])
        assert interior.sum() == 1
        mode = d.y[np.argmax(d.rho)]
        assert abs(mode - steady_state(0.6, 1.0)) < 0.02

    def test_mode_within_one_cell_of_steady_state(self):
        d = stationary_density(make_params(alpha=0.05), n_grid=4096)
        mode = d.y[np.argmax(d.rho)]
        # small-noise mode shift is O(alpha^2), below the grid step
        assert abs(mode - steady_state(0.6, 1.0)) <= 2 * d.grid_step

    def test_first_moment_small_alpha(self):
        d = stationary_density(make_params(alpha=0.05), n_grid=2048)
        mean = np.trapezoid(d.y * d.rho, d.y)
        assert abs(mean - steady_state(0.6, 1.0)) < 0.02

    def test_rejects_bad_args(self):
        with pytest.raises(ValueError):
            stationary_density(make_params(), n_grid=32)
        with pytest.raises(ValueError):
            stationary_density(make_params(), y_margin=0.5)


class TestFpResidual:
    @pytest.mark.parametrize("alpha", [0.05, 0.5, 2.0])
    def test_exact_density_small_residual(self, alpha):
        p = make_params(alpha=alpha)
        d = stationary_density(p, n_grid=4096)
        assert fp_residual(d, p) < 1e-3

    def test_large_alpha_converges_with_resolution(self):
        # the alpha = 10 boundary layer needs a finer grid; the residual
        # must still fall rapidly once the layer is resolved
        p = make_params(alpha=10.0)
        coarse = fp_residual(stationary_density(p, n_grid=8192), p)
        fine = fp_residual(stationary_density(p, n_grid=32768), p)
        assert fine < 2e-4
        assert fine < coarse / 20

    def test_perturbed_density_detected(self):
        p = make_params(alpha=0.5)
        d = stationary_density(p, n_grid=4096)
        base = fp_residual(d, p)
        bad = StationaryDensity(d.y, d.rho * (1.0 + 0.1 * d.y),
                                d.norm_constant, d.method, d.rel_tol)
        assert fp_residual(bad, p) > 10 * base

    def test_uniform_density_is_no_solution(self):
        p = make_params(alpha=0.5)
        y = np.linspace(-0.99, 0.99, 2048)
        uniform = StationaryDensity(y, np.full_like(y, 0.5), 1.0, "na", 0.0)
        assert fp_residual(uniform, p) > 0.1

    def test_grid_too_coarse(self):
        y = np.linspace(-0.9, 0.9, 5)
        d = StationaryDensity(y, np.ones_like(y), 1.0, "na", 0.0)
        with pytest.raises(ValueError):
            fp_residual(d, make_params())


class TestAnalyticExitTimes:
    def test_lower_values(self):
        assert analytic_exit_lower(0.05, 0.6) == pytest.approx(0.05 / 1.2)
        assert analytic_exit_lower(0.05, 0.3) == pytest.approx(
            2 * analytic_exit_lower(0.05, 0.6))
        assert analytic_exit_lower(1e-12, 0.6) == pytest.approx(0.0, abs=1e-11)

    def test_upper_values(self):
        assert analytic_exit_upper(0.05, 1.0) == pytest.approx(0.025)
        assert analytic_exit_upper(0.1, 2.0) == pytest.approx(0.1)

    def test_ratio_is_gt(self):
        for g, t in ((0.6, 1.0), (2.0, 0.5), (4.0, 1.5)):
            ratio = analytic_exit_upper(0.05, t) / analytic_exit_lower(0.05, g)
            assert ratio == pytest.approx(g * t, rel=1e-12)

    def test_rejections(self):
        with pytest.raises(ValueError):
            analytic_exit_lower(0.05, 0.0)
        with pytest.raises(ValueError):
            analytic_exit_upper(-0.1, 1.0)


class TestExitTimeBound:
    def test_value_and_relation(self):
        b = exit_time_bound(0.05, 0.6, 1.0)
        assert b == pytest.approx(0.05 / 0.6)
        assert b == pytest.approx(2 * analytic_exit_lower(0.05, 0.6))

    def test_precondition_rejected(self):
        with pytest.raises(ValueError):
            exit_time_bound(2.0, 0.6, 1.0)


class TestGapBound:
    def test_hand_value_at_t_zero(self):
        # 4 * 0.0025 * (2.56 + 0.5*100*0.05^4) * (0.05/0.6)
        expected = 4 * 0.05 ** 2 * ((1 / 1 + 0.6) ** 2
                                    + 0.5 * 10 ** 2 * 0.05 ** 4) * (0.05 / 0.6)
        assert expected == pytest.approx(2.1336e-3, rel=1e-4)
        assert gap_bound(0.05, 0.6, 1.0, 10.0, 0.0) == pytest.approx(expected)

    def test_cubic_scaling_when_drift_dominates(self):
        ratio = gap_bound(0.025, 0.6, 1.0, 0.0, 0.0) \
            / gap_bound(0.05, 0.6, 1.0, 0.0, 0.0)
        assert ratio == pytest.approx(0.125, rel=1e-12)

    def test_time_growth(self):
        assert gap_bound(0.05, 0.6, 1.0, 10.0, 1.0) == pytest.approx(
            gap_bound(0.05, 0.6, 1.0, 10.0, 0.0) * math.exp(12.0))

    def test_precondition(self):
        with pytest.raises(ValueError):
            gap_bound(2.0, 0.6, 1.0, 10.0, 0.0)


def test_density_csv_and_json(tmp_path):
    d = stationary_density(make_params(alpha=0.5), n_grid=128)
    path = tmp_path / "rho.csv"
    d.to_csv(path)
    assert path.read_text().splitlines()[0] == "y,rho"
    data = np.loadtxt(path, delimiter=",", skiprows=1)
    np.testing.assert_array_equal(data[:, 1], d.rho)
    import json
    meta = json.loads(d.to_json())
    assert meta["method"].startswith("adaptive-quadrature")
