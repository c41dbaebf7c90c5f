import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from tvpar.exceptions import (
    DataError,
    DegenerateRegressor,
    TauOutOfRange,
    WindowTooSmall,
    ZeroStandardError,
)
from tvpar.local import (
    LocalFit,
    TimeSeries,
    Window,
    local_fit,
    make_window,
    t_stat,
    taus_for_dates,
)


def ar1_series(n, rho=0.9, seed=0, mu=0.0):
    rng = np.random.default_rng(seed)
    y = np.empty(n)
    prev = 0.0
    for t in range(n):
        prev = mu + rho * prev + rng.standard_normal()
        y[t] = prev
    return y


def normal_equations_slope(yt, ylag):
    # independent oracle: solve X'X b = X'y with X = [1, Y_{t-1}]
    X = np.column_stack([np.ones_like(ylag), ylag])
    coef = np.linalg.solve(X.T @ X, X.T @ yt)
    return coef[1]


class TestMakeWindow:
    def test_interior(self):
        w = make_window(1500, 0.5, 200)
        assert (w.t1, w.t2) == (650, 850)

    def test_right_boundary_keeps_left_half(self):
        w = make_window(1500, 1.0, 200)
        assert (w.t1, w.t2) == (1400, 1500)

    def test_full_sample_mode(self):
        w = make_window(813, 0.5, 2 * 813)
        assert (w.t1, w.t2) == (2, 813)

    def test_left_boundary(self):
        w = make_window(1500, 0.01, 200)
        assert w.t1 == 2
        assert w.t2 == 15 + 100

    @given(n=st.integers(200, 3000), frac=st.floats(0.2, 0.8), nh=st.integers(8, 40))
    def test_interior_count(self, n, frac, nh):
        w = make_window(n, frac, nh)
        assert w.m == 2 * (nh // 2) + 1

    def test_tau_out_of_range(self):
        with pytest.raises(TauOutOfRange):
            make_window(100, 0.0, 20)
        with pytest.raises(TauOutOfRange):
            make_window(100, 1.2, 20)

    def test_too_small(self):
        with pytest.raises(WindowTooSmall):
            make_window(100, 0.5, 6)

    def test_clamped_below_minimum(self):
        # right edge keeps only nh // 2 + 1 = 5 points
        with pytest.raises(WindowTooSmall):
            make_window(100, 1.0, 8)

    def test_first_index_respected(self):
        w = make_window(100, 0.01, 30, first=7, min_count=8)
        assert w.t1 == 7

    def test_window_needs_lag(self):
        with pytest.raises(WindowTooSmall):
            Window(1, 10, 10)


class TestTimeSeries:
    def test_rejects_nan(self):
        with pytest.raises(DataError):
            TimeSeries([1.0, np.nan, 2.0])

    def test_rejects_short(self):
        with pytest.raises(DataError):
            TimeSeries([1.0, 2.0])

    def test_values_read_only(self):
        s = TimeSeries([1.0, 2.0, 3.0])
        with pytest.raises(ValueError):
            s.values[0] = 5.0

    def test_labels_length(self):
        with pytest.raises(DataError):
            TimeSeries([1.0, 2.0, 3.0], labels=("a", "b"))


class TestLocalFit:
    def test_three_point_example(self):
        fit = local_fit([0.0, 1.0, 0.0], Window(2, 3, 2))
        assert fit.rho_hat == pytest.approx(-1.0)
        assert fit.sigma2_hat == pytest.approx(0.0)

    def test_constant_series(self):
        with pytest.raises(DegenerateRegressor):
            local_fit(np.full(50, 3.0), make_window(50, 0.5, 20))

    def test_noiseless_recursion(self):
        y = 0.5 ** np.arange(40)
        fit = local_fit(y, Window(2, 12, 11))
        assert fit.rho_hat == pytest.approx(0.5, abs=1e-12)
        assert fit.sigma2_hat == 0.0
        with pytest.raises(ZeroStandardError):
            t_stat(fit, 0.5)

    @pytest.mark.parametrize("seed", range(5))
    def test_normal_equations_oracle(self, seed):
        y = ar1_series(1500, 0.95, seed, mu=0.3)
        w = make_window(1500, 0.4, 600)
        fit = local_fit(y, w)
        yt, ylag = y[w.t1 - 1:w.t2], y[w.t1 - 2:w.t2 - 1]
        assert_allclose(fit.rho_hat, normal_equations_slope(yt, ylag), rtol=1e-12)
        resid = yt - yt.mean() - fit.rho_hat * (ylag - ylag.mean())
        assert_allclose(fit.sigma2_hat, np.mean(resid**2), rtol=1e-12)

    def test_variance_uses_realized_count(self):
        y = ar1_series(300, 0.8, 1)
        w = make_window(300, 1.0, 100)
        fit = local_fit(y, w)
        yt, ylag = y[w.t1 - 1:w.t2], y[w.t1 - 2:w.t2 - 1]
        dx = ylag - ylag.mean()
        resid = yt - yt.mean() - fit.rho_hat * dx
        assert w.m == 51
        assert_allclose(fit.s2_hat, (resid @ resid / 51) / (dx @ dx / 51), rtol=1e-12)

    @settings(max_examples=40, deadline=None)
    @given(seed=st.integers(0, 10**6), c=st.floats(-1e3, 1e3), k=st.floats(0.01, 100.0))
    def test_location_scale_invariance(self, seed, c, k):
        y = ar1_series(200, 0.7, seed)
        w = make_window(200, 0.5, 120)
        base = local_fit(y, w)
        moved = local_fit(k * y + c, w)
        assert_allclose(moved.rho_hat, base.rho_hat, rtol=1e-9, atol=1e-10)
        assert_allclose(moved.sigma2_hat, k**2 * base.sigma2_hat, rtol=1e-8)
        assert_allclose(t_stat(moved, 0.6), t_stat(base, 0.6), rtol=1e-8, atol=1e-10)


class TestTStat:
    def _fit(self, rho, s2, m):
        return LocalFit(rho, 1.0, s2, 0.0, 0.0, Window(2, m + 1, m))

    def test_zero_at_estimate(self):
        fit = self._fit(0.9, 1.0, 400)
        assert t_stat(fit, 0.9) == 0.0

    def test_arithmetic(self):
        fit = self._fit(0.9, 1.0, 400)
        assert t_stat(fit, 0.85) == pytest.approx(1.0)

    def test_zero_variance(self):
        with pytest.raises(ZeroStandardError):
            t_stat(self._fit(0.9, 0.0, 400), 0.85)

    def test_vectorized_and_decreasing(self):
        fit = local_fit(ar1_series(500, 0.9, 3), make_window(500, 0.5, 300))
        grid = np.linspace(-1, 1, 101)
        t = t_stat(fit, grid)
        assert t.shape == grid.shape
        assert np.all(np.diff(t) < 0)


def test_taus_for_dates():
    assert_allclose(taus_for_dates(4), [0.25, 0.5, 0.75, 1.0])
    assert_allclose(taus_for_dates(10, [5]), [0.5])
