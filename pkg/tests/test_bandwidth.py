import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from tvpar.bandwidth import (
    choose_bandwidth,
    empirical_loss,
    empirical_nh_grid,
    loss_decomposition,
    one_step_fits,
    robustness_bandwidth,
    rolling_forecast_errors,
    select_bandwidth,
    simulation_nh_grid,
)
from tvpar.exceptions import DataError, GridClampedWarning, WindowTooSmall
from tvpar.simulation import DgpSpec, RhoShape, parse_dgp, simulate_path


def direct_fit(y, s_idx):
    # OLS of Y_s on (1, Y_{s-1}) for 1-indexed dates s_idx
    s = np.asarray(s_idx)
    X = np.column_stack([np.ones(s.size), y[s - 2]])
    coef, *_ = np.linalg.lstsq(X, y[s - 1], rcond=None)
    return coef


@pytest.fixture(scope="module")
def path():
    return simulate_path(parse_dgp("sin 1.00-0.80-1.00 tv", n=600), 17)


class TestRollingFits:
    @pytest.mark.parametrize("nh", [8, 30, 150])
    def test_against_lstsq(self, path, nh):
        y = path.series.values
        fit = one_step_fits(path.series, nh)
        n = y.size
        for t in [2, 3, nh, nh + 1, nh + 2, nh + 3, n // 2, n]:
            if t <= nh + 1:
                block = [s for s in range(2, min(nh + 2, n) + 1) if s != t]
            else:
                block = list(range(t - nh, t))
            mu, rho = direct_fit(y, block)
            k = t - 2
            assert_allclose(fit.rho_hat[k], rho, rtol=1e-9)
            assert_allclose(fit.mu_hat[k], mu, rtol=1e-9, atol=1e-10)

    def test_full_sample_leave_one_out(self, path):
        y = path.series.values
        n = y.size
        for nh in (n - 1, n, 2 * n):
            fit = one_step_fits(path.series, nh)
            mu, rho = direct_fit(y, [s for s in range(2, n + 1) if s != 40])
            assert_allclose(fit.rho_hat[38], rho, rtol=1e-9)
        assert rolling_forecast_errors(path.series, n) == rolling_forecast_errors(path.series, 2 * n)

    def test_fe_definition(self, path):
        y = path.series.values
        fe, fit = rolling_forecast_errors(path.series, 50, return_fit=True)
        pred = fit.mu_hat + fit.rho_hat * y[:-1]
        assert_allclose(fe, np.mean((y[1:] - pred) ** 2), rtol=1e-12)

    def test_small_window(self, path):
        with pytest.raises(WindowTooSmall):
            rolling_forecast_errors(path.series, 7)


class TestCriterion:
    def test_noiseless_recursion(self):
        y = 0.5 ** np.arange(60)
        for nh in (8, 20, 50):
            assert rolling_forecast_errors(y, nh) == pytest.approx(0.0, abs=1e-20)

    def test_iid_noise(self):
        rng = np.random.default_rng(2)
        fe = rolling_forecast_errors(rng.standard_normal(5000), 2000)
        assert fe == pytest.approx(1.0, abs=0.05)

    def test_nonnegative(self, path):
        assert all(rolling_forecast_errors(path.series, h) >= 0 for h in (10, 100, 500))

    def test_degenerate_block_skipped(self):
        rng = np.random.default_rng(3)
        y = rng.standard_normal(400)
        y[100:140] = 1.0
        fe, fit = rolling_forecast_errors(y, 20, return_fit=True)
        assert not fit.valid.all()
        assert math.isfinite(fe)


class TestDecomposition:
    @pytest.mark.parametrize("name", ["flat 0.90", "sin 1.00-0.60-1.00 tv", "kinked 0.60-1.00-0.60 tv"])
    @pytest.mark.parametrize("nh", [20, 140, 650])
    def test_identity(self, name, nh):
        p = simulate_path(parse_dgp(name, n=900), 5)
        d = loss_decomposition(p.series, nh, p.rho, p.mu_star, p.sigma, p.u)
        assert abs(d.residual) < 1e-10
        assert d.loss == pytest.approx(empirical_loss(p.series, nh, p.rho, p.mu_star), rel=1e-12)

    def test_loss_zero_when_exact(self):
        spec = DgpSpec(RhoShape("flat", (0.5,)), sigma=(0.0, 0.0), n=200)
        p = simulate_path(spec, 1)
        assert empirical_loss(p.series, 30, p.rho, p.mu_star) == pytest.approx(0.0, abs=1e-20)


class TestGrids:
    def test_simulation_grid(self):
        g = simulation_nh_grid()
        assert g[0] == 140 and g[-1] == 1500
        assert 500 in g and 650 in g and 515 not in g
        assert g.size == 25 + 18

    def test_empirical_grid(self):
        g = empirical_nh_grid(813)
        assert g[0] == 163 and g[-1] == 1626
        assert np.all(np.diff(g) > 0)
        assert g.size == 16 + 30


class TestSelection:
    def test_increasing_fe(self):
        grid = np.array([140, 155, 170, 185])
        rep = choose_bandwidth(grid, [1.0, 1.1, 1.2, 1.3], n=1500)
        assert rep.h_hat == 140 and rep.h_us0 == 140
        # undersmoothing factor 1.5 * 1500**-.1 < 1 pulls below the grid minimum
        assert rep.h_us == math.floor(1.5 * 1500 ** -0.1 * 140)

    def test_largest_argmin(self):
        rep = choose_bandwidth([140, 155, 170, 185], [1.2, 1.0, 1.1, 1.0], n=1500)
        assert rep.h_hat == 185

    def test_h_us0_quantile(self):
        fe = np.array([5.0, 4.0, 3.0, 2.0, 1.0])
        rep = choose_bandwidth([10, 20, 30, 40, 50], fe, n=100)
        # type-7 .2 quantile of fe is 1.8, first value at or below it is nh=50
        assert rep.h_us0 == 50

    def test_us_inflation_anchor(self):
        # n = 813, minimizer at the smallest empirical grid value
        grid = empirical_nh_grid(813)
        fe = np.linspace(1.0, 2.0, grid.size)
        rep = choose_bandwidth(grid, fe, n=813)
        assert rep.h_hat == 163
        assert rep.h_us == 125

    def test_robustness_anchor(self):
        assert robustness_bandwidth(125) == 188
        assert robustness_bandwidth(823) == 1234

    @settings(max_examples=200)
    @given(fe=st.lists(st.floats(0.01, 10.0), min_size=1, max_size=40),
           n=st.integers(60, 5000))
    def test_h_us_bounded_by_h_hat(self, fe, n):
        grid = 140 + 15 * np.arange(len(fe))
        rep = choose_bandwidth(grid, fe, n=n)
        assert rep.h_hat in grid
        assert rep.h_us <= rep.h_hat
        assert rep.h_us >= 8

    def test_grid_validation(self, path):
        with pytest.raises(DataError):
            select_bandwidth(path.series, [200, 100])
        with pytest.raises(DataError):
            select_bandwidth(path.series, [4, 100])

    def test_grid_above_n_warns(self, path):
        with pytest.warns(GridClampedWarning):
            rep = select_bandwidth(path.series, [100, 300, 900, 1200])
        assert rep.clamped
        assert rep.fe_map()[900] == rep.fe_map()[1200]

    def test_no_warning_inside(self, path):
        with warnings.catch_warnings():
            warnings.simplefilter("error", GridClampedWarning)
            select_bandwidth(path.series, [100, 300, 600])

    def test_deterministic(self, path):
        a = select_bandwidth(path.series, [50, 100, 200])
        b = select_bandwidth(path.series, [50, 100, 200])
        assert_allclose(a.fe, b.fe, rtol=0, atol=0)


@pytest.mark.xfail(strict=True, reason=(
    "flat DGP: loss keeps falling up to the full-sample fit, so any selection "
    "below the top of the grid is penalized far beyond 1.5; observed share is about .4"))
def test_selected_loss_near_oracle():
    # L(h_hat) within 50% of the best achievable loss in most replications
    spec = parse_dgp("flat 0.90")
    grid = simulation_nh_grid()
    ratios = []
    for r in range(200):
        p = simulate_path(spec, np.random.SeedSequence(99, spawn_key=(r,)))
        fe = np.array([rolling_forecast_errors(p.series, h) for h in grid])
        loss = np.array([empirical_loss(p.series, h, p.rho, p.mu_star) for h in grid])
        h_hat = choose_bandwidth(grid, fe, p.series.n).h_hat
        ratios.append(loss[grid == h_hat][0] / loss.min())
    ratios = np.array(ratios)
    assert np.all(ratios >= 1.0)
    assert np.mean(ratios <= 1.5) >= 0.9
