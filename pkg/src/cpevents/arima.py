"""Correlograms, ARIMA order selection, CSS fitting and forecasting."""
import csv
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import _kernels
from .errors import DataError, FitError, NumericalError, ZeroVarianceError

Z80 = 1.2816
Z95 = 1.9600
MAX_ITER = 500
TOL = 1e-8


@dataclass(frozen=True)
class CorrelogramResult:
    lags: np.ndarray
    coefficients: np.ndarray
    n: int
    significance_band: float

    @property
    def significant(self):
        return np.abs(self.coefficients) > self.significance_band


def _check_lag(v, max_lag):
    if v.ndim != 1:
        raise DataError("series must be one-dimensional")
    if not 1 <= max_lag < v.size:
        raise DataError(f"need 1 <= max_lag < len(series); got max_lag={max_lag}, n={v.size}")


def acf(values, max_lag):
    """Sample autocorrelation with the biased (divide by n) autocovariance."""
    v = np.asarray(values, dtype=float)
    _check_lag(v, max_lag)
    d = v - v.mean()
    denom = float(np.dot(d, d))
    if denom <= 0.0:
        raise ZeroVarianceError("series has zero variance")
    r = np.empty(max_lag + 1)
    r[0] = 1.0
    for k in range(1, max_lag + 1):
        r[k] = np.dot(d[:-k], d[k:]) / denom
    return CorrelogramResult(np.arange(max_lag + 1), r, v.size, Z95 / math.sqrt(v.size))


def durbin_levinson(r, max_lag):
    """Partial autocorrelations phi_kk, k = 1..max_lag, from autocorrelations ``r``."""
    pacf = np.empty(max_lag)
    phi = np.zeros(max_lag)
    err = 1.0
    for k in range(1, max_lag + 1):
        num = r[k] - np.dot(phi[:k - 1], r[k - 1:0:-1])
        a = num / err
        if abs(a) > 1 + 1e-6:
            raise NumericalError(f"Durbin-Levinson diverged at lag {k} (|phi|={abs(a):.6g})")
        prev = phi[:k - 1].copy()
        phi[:k - 1] = prev - a * prev[::-1]
        phi[k - 1] = a
        pacf[k - 1] = a
        err *= 1.0 - a * a
        if err <= 0.0:
            # perfectly predictable series; remaining partial correlations vanish
            pacf[k:] = 0.0
            break
    return pacf


def pacf(values, max_lag):
    r = acf(values, max_lag)
    coef = np.concatenate(([1.0], durbin_levinson(r.coefficients, max_lag)))
    return CorrelogramResult(r.lags, coef, r.n, r.significance_band)


@dataclass(frozen=True)
class ArimaOrder:
    p: int = 0
    d: int = 0
    q: int = 0
    drift: bool = False

    def __post_init__(self):
        if min(self.p, self.d, self.q) < 0 or self.d > 2:
            raise ValueError(f"invalid ARIMA order {self}")

    def __str__(self):
        tag = " with drift" if self.drift else ""
        return f"ARIMA({self.p},{self.d},{self.q}){tag}"


RANDOM_WALK = ArimaOrder(0, 1, 0)


def _leading_run(mask):
    run = 0
    for flag in mask:
        if not flag:
            break
        run += 1
    return run


def _slope_is_significant(v):
    n = v.size
    if n < 3:
        return False
    t = np.arange(n, dtype=float)
    t -= t.mean()
    sxx = float(np.dot(t, t))
    slope = float(np.dot(t, v - v.mean())) / sxx
    resid = v - v.mean() - slope * t
    s2 = float(np.dot(resid, resid)) / (n - 2)
    if s2 == 0.0:
        return slope != 0.0
    return abs(slope) > 2.0 * math.sqrt(s2 / sxx)


def default_max_lag(n):
    return max(1, min(10, n // 2))


def select_order(values, max_lag=None):
    """Pick (p, d, q) from the correlogram of a segment.

    q is the length of the run of significant ACF lags starting at lag 1, p the
    same for the PACF. When both are zero but the lag-1 autocorrelation sits
    just under the significance band (above 95% of it), the level is treated
    as a random walk and d = 1. ``drift`` marks a least-squares slope more than
    two standard errors from zero.
    """
    v = np.asarray(values, dtype=float)
    if max_lag is None:
        max_lag = default_max_lag(v.size)
    if v.size < 2 * max_lag:
        raise DataError(f"segment of length {v.size} too short for max_lag={max_lag}")
    a = acf(v, max_lag)
    pa = pacf(v, max_lag)
    q = _leading_run(a.significant[1:])
    p = _leading_run(pa.significant[1:])
    d = 0
    if p == 0 and q == 0 and a.coefficients[1] > 0.95 * a.significance_band:
        d = 1
    return ArimaOrder(p, d, q, _slope_is_significant(v))


@dataclass(frozen=True)
class ArimaModel:
    order: ArimaOrder
    ar_coefficients: tuple = ()
    ma_coefficients: tuple = ()
    mean: float = 0.0  # level for d == 0, drift for d >= 1
    trend: float = 0.0  # slope per step when d == 0 and drift is on
    sigma: float = 0.0
    n_obs: int = 0
    last_values: tuple = ()  # tail of the observed series
    last_z: tuple = ()  # tail of the centred stationary series
    last_residuals: tuple = ()
    iterations: int = 0
    converged: bool = True
    diagnostics: dict = field(default_factory=dict, compare=False)

    @property
    def drift_value(self):
        return self.mean if self.order.d >= 1 else self.trend

    @property
    def degenerate(self):
        return self.sigma == 0.0

    @classmethod
    def random_walk(cls, last, sigma, drift=0.0):
        order = ArimaOrder(0, 1, 0, drift != 0.0)
        return cls(order, mean=drift, sigma=float(sigma), last_values=(float(last),), n_obs=0)


def difference(values, d):
    w = np.asarray(values, dtype=float)
    for _ in range(d):
        w = np.diff(w)
    return w


def integrate(diffs, heads):
    """Invert :func:`difference`: ``heads[i]`` is the first value at level i."""
    w = np.asarray(diffs, dtype=float)
    for head in reversed(heads):
        w = np.concatenate(([head], head + np.cumsum(w)))
    return w


def _css(z, p, q, backend=None):
    kernel = {None: _kernels.css_residuals, "numba": _kernels.css_loops, "numpy": _kernels.css_numpy}[backend]
    beta = np.zeros(p + q)
    e, J = kernel(z, beta[:p], beta[p:])
    sse = float(np.dot(e, e))
    converged = False
    it = 0
    for it in range(1, MAX_ITER + 1):
        step, *_ = np.linalg.lstsq(J, -e, rcond=None)
        scale = 1.0
        accepted = False
        while scale > 1e-10:
            cand = beta + scale * step
            ce, cJ = kernel(z, cand[:p], cand[p:])
            csse = float(np.dot(ce, ce))
            if np.isfinite(csse) and csse < sse:
                accepted = True
                break
            scale *= 0.5
        if not accepted:
            converged = True  # no descent direction left: stationary point
            break
        change = float(np.max(np.abs(cand - beta))) if cand.size else 0.0
        beta, e, J, sse = cand, ce, cJ, csse
        if change < TOL:
            converged = True
            break
    if not converged:
        raise FitError(
            f"CSS did not converge in {MAX_ITER} iterations",
            {"params": beta.tolist(), "sse": sse, "iterations": it},
        )
    return beta, e, sse, it


def fit(values, order, backend=None):
    """Fit ``order`` to ``values`` by conditional sum of squares.

    The series is differenced d times first. A level (d == 0) or drift
    (d >= 1, when requested) is removed by its sample mean; d == 0 with drift
    removes a least-squares line instead.
    """
    y = np.asarray(values, dtype=float)
    p, d, q = order.p, order.d, order.q
    if y.size <= p + d + q + 1:
        raise DataError(f"{y.size} observations are too few for {order}")
    w = difference(y, d)
    mean = trend = 0.0
    if d == 0 and order.drift:
        t = np.arange(w.size, dtype=float)
        trend, mean = np.polyfit(t, w, 1)
        z = w - (mean + trend * t)
        # store the level at the last observation so forecasts extend the line
        mean = mean + trend * (w.size - 1)
    elif d == 0 or order.drift:
        mean = float(w.mean())
        z = w - mean
    else:
        z = w
    if p == 0 and q == 0:
        e = z
        sigma = math.sqrt(float(np.dot(z, z)) / (z.size - 1)) if z.size > 1 else 0.0
        beta = np.zeros(0)
        it = 0
    else:
        beta, e, sse, it = _css(z, p, q, backend)
        dof = max(e.size - p - q, 1)
        sigma = math.sqrt(sse / dof)
    tail = max(p, 1)
    return ArimaModel(
        order=order,
        ar_coefficients=tuple(float(x) for x in beta[:p]),
        ma_coefficients=tuple(float(x) for x in beta[p:]),
        mean=float(mean),
        trend=float(trend),
        sigma=sigma,
        n_obs=int(y.size),
        last_values=tuple(float(x) for x in y[-(d + 1):]) if d else (float(y[-1]),),
        last_z=tuple(float(x) for x in z[-tail:]),
        last_residuals=tuple(float(x) for x in e[-q:]) if q else (),
        iterations=it,
    )


@dataclass(frozen=True)
class Forecast:
    horizon: int
    point: float
    pi80: tuple
    pi95: tuple


def psi_weights(ar, ma, d, h):
    """MA(infinity) weights of the integrated model, psi_0 .. psi_{h-1}."""
    # AR side polynomial phi(B) (1 - B)^d written as 1 - sum a_i B^i
    poly = np.concatenate(([1.0], -np.asarray(ar, dtype=float)))
    for _ in range(d):
        poly = np.convolve(poly, [1.0, -1.0])
    a = -poly[1:]
    psi = np.zeros(h)
    psi[0] = 1.0
    for j in range(1, h):
        acc = ma[j - 1] if j - 1 < len(ma) else 0.0
        for i in range(1, min(j, a.size) + 1):
            acc += a[i - 1] * psi[j - i]
        psi[j] = acc
    return psi


def _forecast_stationary(model, h):
    """Point forecasts of the centred stationary series with zero future shocks."""
    p, q = model.order.p, model.order.q
    z_hist = list(model.last_z)
    e_hist = list(model.last_residuals)
    out = []
    for step in range(h):
        val = 0.0
        for i in range(p):
            val += model.ar_coefficients[i] * z_hist[-1 - i]
        for j in range(q):
            k = j - step  # index into past residuals; future ones are zero
            if k >= 0 and k < len(e_hist):
                val += model.ma_coefficients[j] * e_hist[-1 - k]
        z_hist.append(val)
        out.append(val)
    return np.array(out)


def forecast(model, horizon):
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    d = model.order.d
    zf = _forecast_stationary(model, horizon)
    steps = np.arange(1, horizon + 1)
    if d == 0:
        wf = zf + model.mean + model.trend * steps
        point = wf
    else:
        wf = zf + model.mean
        last = list(model.last_values)
        # last differences at each level, top level first
        levels = [np.array(last)]
        for _ in range(d - 1):
            levels.append(np.diff(levels[-1]))
        point = wf
        for lvl in reversed(range(d)):
            point = levels[lvl][-1] + np.cumsum(point)
    psi = psi_weights(model.ar_coefficients, model.ma_coefficients, d, horizon)
    se = model.sigma * np.sqrt(np.cumsum(psi * psi))
    out = []
    for h in range(horizon):
        pt = float(point[h])
        h80 = Z80 * float(se[h])
        h95 = Z95 * float(se[h])
        out.append(Forecast(h + 1, pt, (pt - h80, pt + h80), (pt - h95, pt + h95)))
    return out


FORECAST_FIELDS = ["t", "actual", "point", "lo80", "hi80", "lo95", "hi95"]


def write_forecast_csv(forecasts, path, start_t=1, actual=None):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(FORECAST_FIELDS)
        for i, f in enumerate(forecasts):
            act = "" if actual is None or i >= len(actual) else actual[i]
            w.writerow([start_t + i, act, f"{f.point:.2f}", f"{f.pi80[0]:.2f}", f"{f.pi80[1]:.2f}",
                        f"{f.pi95[0]:.2f}", f"{f.pi95[1]:.2f}"])


def with_sigma(model, sigma):
    return replace(model, sigma=float(sigma))
