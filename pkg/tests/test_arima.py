import math

import numpy as np
import pytest
from oracles import acf_direct, pacf_regression, simulate_arma
from scipy.optimize import minimize_scalar

from cpevents.arima import (
    RANDOM_WALK,
    ArimaModel,
    ArimaOrder,
    acf,
    difference,
    durbin_levinson,
    fit,
    forecast,
    integrate,
    pacf,
    psi_weights,
    select_order,
    with_sigma,
    write_forecast_csv,
)
from cpevents.errors import DataError, NumericalError, ZeroVarianceError


class TestCorrelogram:
    @pytest.mark.parametrize("seed", range(10))
    def test_acf_direct(self, seed):
        rng = np.random.default_rng(seed)
        x = simulate_arma(rng, 80, ar=(0.5,))
        assert np.allclose(acf(x, 10).coefficients, acf_direct(x, 10), atol=1e-12)

    @pytest.mark.parametrize("seed", range(10))
    def test_pacf_regression(self, seed):
        rng = np.random.default_rng(seed)
        x = simulate_arma(rng, 60, ar=(0.6, -0.3))
        assert np.allclose(pacf(x, 8).coefficients, pacf_regression(x, 8), atol=1e-9)

    def test_band(self):
        r = acf(np.arange(100.0) % 7, 5)
        assert r.significance_band == pytest.approx(1.96 / 10)
        assert r.lags.tolist() == [0, 1, 2, 3, 4, 5]

    def test_durbin_levinson_ar2_theory(self):
        phi1, phi2 = 0.5, 0.3
        r = [1.0, phi1 / (1 - phi2)]
        for _ in range(4):
            r.append(phi1 * r[-1] + phi2 * r[-2])
        out = durbin_levinson(np.array(r), 4)
        assert out[0] == pytest.approx(r[1])
        assert out[1] == pytest.approx(phi2)
        assert out[2:] == pytest.approx([0.0, 0.0], abs=1e-12)

    def test_durbin_levinson_divergence(self):
        with pytest.raises(NumericalError):
            durbin_levinson(np.array([1.0, 0.9, -0.9]), 2)

    def test_zero_variance(self):
        with pytest.raises(ZeroVarianceError):
            acf(np.ones(20), 3)

    def test_lag_bounds(self):
        with pytest.raises(DataError):
            acf(np.arange(5.0), 5)


class TestSelectOrder:
    def test_white_noise(self):
        rng = np.random.default_rng(4)
        assert select_order(rng.normal(size=200)) == ArimaOrder(0, 0, 0, False)

    def test_ar1(self):
        rng = np.random.default_rng(0)
        o = select_order(simulate_arma(rng, 300, ar=(0.7,)))
        assert o.p >= 1 and o.d == 0

    def test_trend_sets_drift(self):
        rng = np.random.default_rng(0)
        o = select_order(np.arange(100.0) + rng.normal(0, 1, 100))
        assert o.drift

    def test_short_segment(self):
        with pytest.raises(DataError):
            select_order(np.arange(10.0), max_lag=6)


def css_ar_oracle(z, p):
    y = z[p:]
    X = np.column_stack([z[p - 1 - i:z.size - 1 - i] for i in range(p)])
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    return coef


def css_ma1(z, theta):
    e_prev = 0.0
    total = 0.0
    for v in z:
        e = v - theta * e_prev
        total += e * e
        e_prev = e
    return total


class TestFit:
    @pytest.mark.parametrize("backend", ["numba", "numpy"])
    def test_ar_matches_ols(self, backend):
        rng = np.random.default_rng(11)
        x = simulate_arma(rng, 300, ar=(0.6, -0.2)) + 50
        m = fit(x, ArimaOrder(2, 0, 0), backend=backend)
        z = x - x.mean()
        assert np.allclose(m.ar_coefficients, css_ar_oracle(z, 2), atol=1e-8)
        assert m.mean == pytest.approx(x.mean())
        assert m.converged

    @pytest.mark.parametrize("backend", ["numba", "numpy"])
    def test_ma1_matches_grid(self, backend):
        rng = np.random.default_rng(5)
        x = simulate_arma(rng, 400, ma=(0.5,))
        m = fit(x, ArimaOrder(0, 0, 1), backend=backend)
        z = x - x.mean()
        best = minimize_scalar(lambda t: css_ma1(z, t), bounds=(-0.99, 0.99), method="bounded",
                               options={"xatol": 1e-10})
        assert m.ma_coefficients[0] == pytest.approx(best.x, abs=1e-5)
        assert m.sigma == pytest.approx(math.sqrt(best.fun / (z.size - 1)), rel=1e-6)

    def test_backends_agree_arma(self):
        rng = np.random.default_rng(9)
        x = simulate_arma(rng, 200, ar=(0.5,), ma=(0.3,))
        a = fit(x, ArimaOrder(1, 0, 1), backend="numba")
        b = fit(x, ArimaOrder(1, 0, 1), backend="numpy")
        assert np.allclose(a.ar_coefficients + a.ma_coefficients, b.ar_coefficients + b.ma_coefficients, atol=1e-8)

    def test_white_noise_sigma(self):
        x = np.array([1.0, 3.0, 2.0, 6.0, 3.0])
        m = fit(x, ArimaOrder(0, 0, 0))
        assert m.mean == pytest.approx(3.0)
        assert m.sigma == pytest.approx(np.std(x, ddof=1))

    def test_random_walk_sigma(self):
        x = np.array([10.0, 12.0, 11.0, 15.0, 14.0])
        m = fit(x, RANDOM_WALK)
        assert m.sigma == pytest.approx(math.sqrt((4 + 1 + 16 + 1) / 3))
        assert m.last_values[-1] == 14.0

    def test_too_short(self):
        with pytest.raises(DataError):
            fit([1.0, 2.0], ArimaOrder(1, 0, 1))


class TestForecast:
    def test_random_walk(self):
        m = ArimaModel.random_walk(100.0, 2.0)
        fs = forecast(m, 4)
        for h, f in enumerate(fs, 1):
            assert f.point == 100.0
            assert f.pi95[1] - f.point == pytest.approx(1.96 * 2.0 * math.sqrt(h))
            assert f.point - f.pi80[0] == pytest.approx(1.2816 * 2.0 * math.sqrt(h))

    def test_random_walk_drift(self):
        x = np.array([0.0, 2.0, 4.0, 6.0, 8.5])
        m = fit(x, ArimaOrder(0, 1, 0, True))
        assert [f.point for f in forecast(m, 3)] == pytest.approx([8.5 + 2.125 * h for h in (1, 2, 3)])

    def test_ar1(self):
        rng = np.random.default_rng(2)
        x = simulate_arma(rng, 200, ar=(0.6,)) + 10
        m = fit(x, ArimaOrder(1, 0, 0))
        phi = m.ar_coefficients[0]
        fs = forecast(m, 3)
        for h, f in enumerate(fs, 1):
            assert f.point == pytest.approx(m.mean + phi ** h * (x[-1] - m.mean))
            var = sum(phi ** (2 * j) for j in range(h))
            assert f.pi95[1] - f.point == pytest.approx(1.96 * m.sigma * math.sqrt(var))

    def test_linear_trend_d0(self):
        x = 3.0 + 0.5 * np.arange(40.0)
        m = fit(x, ArimaOrder(0, 0, 0, True))
        assert [f.point for f in forecast(m, 2)] == pytest.approx([23.0, 23.5])

    def test_zero_sigma_collapses(self):
        fs = forecast(ArimaModel.random_walk(5.0, 0.0), 2)
        assert all(f.pi95 == (5.0, 5.0) for f in fs)

    def test_psi_weights(self):
        assert psi_weights((), (), 1, 4).tolist() == [1, 1, 1, 1]
        assert psi_weights((0.5,), (), 0, 3) == pytest.approx([1, 0.5, 0.25])
        assert psi_weights((), (0.4,), 0, 3) == pytest.approx([1, 0.4, 0])

    def test_bad_horizon(self):
        with pytest.raises(ValueError):
            forecast(ArimaModel.random_walk(1.0, 1.0), 0)

    def test_csv(self, tmp_path):
        m = with_sigma(ArimaModel.random_walk(14202.0, 1.0), 68.18)
        write_forecast_csv(forecast(m, 2), tmp_path / "f.csv", start_t=92, actual=[14100])
        lines = (tmp_path / "f.csv").read_text().splitlines()
        assert lines[0] == "t,actual,point,lo80,hi80,lo95,hi95"
        assert lines[1].startswith("92,14100,14202.00,")
        assert lines[2].startswith("93,,")


def test_difference_integrate_round_trip():
    x = np.array([3.0, 5.0, 4.0, 9.0, 7.0])
    d2 = difference(x, 2)
    assert integrate(d2, [x[0], x[1] - x[0]]) == pytest.approx(x)
