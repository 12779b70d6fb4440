import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qtelegraph import (ModelParams, StateLabel, Trajectory, classify,
                        dwell_statistics, exit_time_mc, histogram,
                        occupancy_fraction, smooth, stationary_density,
                        simulate_trajectory, tv_distance)
from qtelegraph.analysis import default_burn_in

FIG1A = ModelParams(0.6, 1.0, 10.0, 1e-4)


def make_traj(values, dt=0.01):
    values = np.asarray(values, dtype=float)
    return Trajectory(np.arange(values.size) * dt, values, seed=None)


class TestClassify:
    def test_examples(self):
        assert classify(0.96, 0.05) is StateLabel.UPPER
        assert classify(-1.0, 0.05) is StateLabel.LOWER
        assert classify(0.0, 0.05) is StateLabel.TRANSIT

    def test_closed_band_edges(self):
        assert classify(0.95, 0.05) is StateLabel.UPPER
        assert classify(-0.95, 0.05) is StateLabel.LOWER

    def test_domain_errors(self):
        with pytest.raises(ValueError):
            classify(1.2, 0.05)
        with pytest.raises(ValueError):
            classify(0.0, 1.0)


class TestDwellStatistics:
    def test_constant_upper_is_undefined_ratio(self):
        rep = dwell_statistics(make_traj(np.ones(100)), 0.05)
        assert rep.t_lower == 0.0
        assert not rep.ratio_defined and rep.ratio is None
        assert rep.t_upper == pytest.approx(rep.duration)

    def test_square_wave_ratio(self):
        # 2s in the upper band, 1s in the lower band per period
        period = np.concatenate([np.ones(200), -np.ones(100)])
        rep = dwell_statistics(make_traj(np.tile(period, 10)), 0.05)
        assert rep.ratio == pytest.approx(2.0)
        assert rep.n_upper_to_lower == 10
        assert rep.n_lower_to_upper == 9

    def test_transit_runs_collapse_into_one_jump(self):
        vals = [1, 1, 0, 0.2, -0.3, -1, -1, 0, 1]  # one down, one up jump
        rep = dwell_statistics(make_traj(vals), 0.05)
        assert rep.n_upper_to_lower == 1
        assert rep.n_lower_to_upper == 1

    def test_band_edge_chatter_not_double_counted(self):
        # upper -> transit -> upper is no jump at all
        vals = [1, 0.9, 1, 0.9, 1, -1]
        rep = dwell_statistics(make_traj(vals), 0.05)
        assert rep.n_upper_to_lower == 1
        assert rep.n_lower_to_upper == 0

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.floats(-1.0, 1.0), min_size=2, max_size=300))
    def test_time_conservation(self, values):
        rep = dwell_statistics(make_traj(values), 0.05)
        assert rep.t_upper + rep.t_lower + rep.t_transit == pytest.approx(
            rep.duration, abs=1e-12)

    def test_fig1a_ratio_converges(self):
        traj = simulate_trajectory(FIG1A, 1.0, 2_000_000, seed=400)
        rep = dwell_statistics(traj.after(default_burn_in(FIG1A)), 0.05)
        assert rep.ratio == pytest.approx(0.6, rel=0.25)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            dwell_statistics(make_traj([1.0]), 0.05)


class TestOccupancyFraction:
    def test_endpoints(self):
        assert occupancy_fraction(make_traj(np.ones(50))) == 1.0
        assert occupancy_fraction(make_traj(np.zeros(50))) == 0.0

    def test_alpha_ordering(self):
        # band mass at the small alphas is below 1e-18 (stationary
        # density), so finite runs measure exactly zero there; only the
        # non-strict ordering and a large alpha = 10 fraction are testable
        fracs = []
        for alpha in (0.05, 0.5, 10.0):
            p = ModelParams(0.6, 1.0, alpha, 1e-4)
            traj = simulate_trajectory(p, 1.0, 1_000_000, seed=41)
            fracs.append(occupancy_fraction(traj.after(default_burn_in(p))))
        assert fracs[0] <= fracs[1] <= fracs[2]
        assert fracs[2] > 0.8


class TestSmooth:
    def test_constant_preserved(self):
        traj = make_traj(np.full(200, 0.7))
        out = smooth(traj, 0.05)
        np.testing.assert_allclose(out.values, traj.values, rtol=1e-14)

    def test_impulse_mass_preserved(self):
        vals = np.zeros(401)
        vals[200] = 1.0
        out = smooth(make_traj(vals), 0.05)
        assert out.values.sum() == pytest.approx(1.0, rel=1e-9)
        assert out.values[200] == out.values.max()

    def test_mean_preserved_with_quiet_edges(self):
        rng = np.random.default_rng(8)
        vals = np.zeros(2000)
        vals[200:-200] = rng.standard_normal(1600)
        traj = make_traj(vals, dt=0.01)
        out = smooth(traj, 0.1)
        assert out.values.mean() == pytest.approx(vals.mean(), abs=1e-12)

    def test_white_noise_variance_reduction(self):
        # smoothed variance ~ sigma^2 * spacing / (2 sqrt(pi) width)
        rng = np.random.default_rng(17)
        dt, width, sigma = 1e-3, 5e-3, 2.0
        vals = sigma * rng.standard_normal(200_000)
        out = smooth(make_traj(vals, dt=dt), width)
        predicted = sigma ** 2 * dt / (2.0 * math.sqrt(math.pi) * width)
        measured = out.values[5000:-5000].var()
        assert measured == pytest.approx(predicted, rel=0.05)

    def test_grid_unchanged(self):
        traj = make_traj(np.sin(np.linspace(0, 5, 300)))
        out = smooth(traj, 0.05)
        np.testing.assert_array_equal(out.times, traj.times)

    def test_rejects_subresolution_width(self):
        with pytest.raises(ValueError):
            smooth(make_traj(np.zeros(10), dt=0.1), 0.01)


class TestHistogram:
    def test_constant_series(self):
        h = histogram(make_traj(np.zeros(100)), 4)
        np.testing.assert_array_equal(h.probabilities, [0, 0, 1, 0])

    def test_uniform_samples(self):
        rng = np.random.default_rng(3)
        h = histogram(make_traj(rng.uniform(-1, 1, 40_000)), 8)
        se = math.sqrt(0.125 * 0.875 / 40_000)
        assert np.abs(h.probabilities - 0.125).max() < 3 * se

    def test_telegraph_mass_in_outer_bins(self):
        traj = simulate_trajectory(FIG1A, 1.0, 500_000, seed=19)
        h = histogram(traj.after(default_burn_in(FIG1A)), 20)
        assert h.probabilities[0] + h.probabilities[-1] > 0.8

    def test_sums_to_one(self):
        h = histogram(make_traj(np.linspace(-1, 1, 999)), 13)
        assert h.probabilities.sum() == pytest.approx(1.0, abs=1e-12)

    def test_rejects_few_bins(self):
        with pytest.raises(ValueError):
            histogram(make_traj(np.zeros(5)), 1)

    def test_tv_to_stationary_density_shrinks_with_samples(self):
        p = ModelParams(0.6, 1.0, 0.5, 1e-4)
        dens = stationary_density(p, 1024)
        tvs = []
        for n in (200_000, 2_000_000):
            traj = simulate_trajectory(p, 1.0, n, seed=23)
            h = histogram(traj.after(default_burn_in(p)), 40)
            tvs.append(tv_distance(h.probabilities,
                                   dens.bin_masses(h.bin_edges)))
        assert tvs[1] < tvs[0]


class TestExitTimeMc:
    def test_basic_report(self):
        rep = exit_time_mc(FIG1A, -1.0, 0.05, 500, 100_000, seed=2)
        assert rep.n_samples == 500 and rep.n_censored == 0
        assert rep.mc_stderr > 0
        assert rep.analytic_value == pytest.approx(0.05 / 1.2)
        assert rep.analytic_bound == pytest.approx(0.05 / 0.6)
        assert rep.mc_mean == pytest.approx(rep.analytic_value, rel=0.25)

    def test_upper_start_has_no_bound(self):
        rep = exit_time_mc(FIG1A, 1.0, 0.05, 300, 100_000, seed=3)
        assert rep.analytic_bound is None
        assert rep.analytic_value == pytest.approx(0.025)

    def test_start_inside_band_allowed(self):
        rep = exit_time_mc(FIG1A, -0.97, 0.05, 200, 100_000, seed=4)
        assert rep.mc_mean > 0

    def test_start_in_transit_rejected(self):
        with pytest.raises(ValueError):
            exit_time_mc(FIG1A, 0.0, 0.05, 10, 1000, seed=0)

    def test_censoring_reported(self):
        # a two-step cap censors essentially every run
        with pytest.raises(RuntimeError):
            exit_time_mc(FIG1A, -1.0, 0.05, 20, 2, seed=6)

    def test_worker_invariance(self):
        a = exit_time_mc(FIG1A, -1.0, 0.05, 100, 100_000, seed=8,
                         n_workers=1)
        b = exit_time_mc(FIG1A, -1.0, 0.05, 100, 100_000, seed=8,
                         n_workers=2)
        assert a == b


def test_dwell_report_json_has_no_infinity():
    rep = dwell_statistics(make_traj(np.ones(10)), 0.05)
    text = rep.to_json()
    assert "Infinity" not in text and '"ratio": null' in text
