"""Seasonal ARIMA fitting by conditional sum of squares, AIC grid search and interval forecasts.

Orders are restricted to p, q, P, Q in {0, 1}: every polynomial factor has a
single coefficient, so stationarity and invertibility reduce to |coef| < 1.
"""
import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize, signal, stats

M_RANGE = range(1, 9)
PENALTY = 1e10


class SeriesTooShortError(ValueError):
    pass


@dataclass(frozen=True)
class SarimaOrder:
    p: int = 0
    d: int = 1
    q: int = 0
    P: int = 0
    D: int = 0
    Q: int = 0
    m: int = 1

    def __post_init__(self):
        for name in ("p", "q", "P", "Q"):
            if getattr(self, name) not in (0, 1):
                raise ValueError(f"{name} must be 0 or 1")
        if self.d < 0 or self.D < 0:
            raise ValueError("differencing orders must be non-negative")
        if self.m < 1:
            raise ValueError("seasonal period must be at least 1")

    @property
    def n_coef(self):
        return self.p + self.q + self.P + self.Q

    @property
    def key(self):
        return (self.p, self.q, self.P, self.D, self.Q)

    def __str__(self):
        return f"({self.p},{self.d},{self.q})({self.P},{self.D},{self.Q})_{self.m}"


@dataclass(frozen=True)
class SarimaFit:
    order: SarimaOrder
    ar: float
    ma: float
    sar: float
    sma: float
    sigma2: float
    sse: float
    aic: float
    residuals: np.ndarray
    series: np.ndarray
    converged: bool = True
    initial_aic: float = math.nan

    @property
    def coefficients(self):
        o = self.order
        return tuple(v for v, on in ((self.ar, o.p), (self.ma, o.q), (self.sar, o.P), (self.sma, o.Q)) if on)


@dataclass(frozen=True)
class Forecast:
    horizon: int
    point: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    level: float


def _lags(d, D, m):
    return [1] * d + [m] * D


def seasonal_difference(series, d, D, m):
    """Apply (1-B)^d (1-B^m)^D."""
    return difference_with_initials(series, d, D, m)[0]


def difference_with_initials(series, d, D, m):
    """Differenced series and the leading values each pass removes."""
    x = np.asarray(series, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("series contains non-finite values")
    if x.size <= d + D * m:
        raise SeriesTooShortError(f"series of length {x.size} too short for d={d}, D={D}, m={m}")
    initials = []
    for lag in _lags(d, D, m):
        initials.append(x[:lag].copy())
        x = x[lag:] - x[:-lag]
    return x, initials


def integrate(diffed, initials, d, D, m):
    """Undo :func:`difference_with_initials`."""
    x = np.asarray(diffed, dtype=float)
    for lag, init in zip(reversed(_lags(d, D, m)), reversed(initials)):
        y = np.concatenate([init, np.zeros(x.size)])
        for i in range(lag, y.size):
            y[i] = x[i - lag] + y[i - lag]
        x = y
    return x


def _poly(coef, lag):
    out = np.zeros(lag + 1)
    out[0] = 1.0
    out[lag] += coef
    return out


def ar_polynomial(order, ar, sar):
    """Coefficients of phi(B) Phi(B^m), leading 1, sign convention 1 - phi B."""
    return np.convolve(_poly(-ar * order.p, 1), _poly(-sar * order.P, order.m))


def ma_polynomial(order, ma, sma):
    return np.convolve(_poly(ma * order.q, 1), _poly(sma * order.Q, order.m))


def _start(order):
    return order.p + order.P * order.m


def css_residuals(w, order, ar=0.0, ma=0.0, sar=0.0, sma=0.0):
    """Conditional residuals of the ARMA part on the differenced series ``w``."""
    a = ar_polynomial(order, ar, sar)
    t0 = _start(order)
    u = np.convolve(w, a)[t0:w.size]
    c = ma_polynomial(order, ma, sma)
    return signal.lfilter([1.0], c, u)


def _aic(sse, n, k):
    if sse <= 0:
        return -math.inf
    return n * math.log(sse / n) + 2 * (k + 1)


def _unpack(order, theta):
    vals = iter(theta)
    ar = next(vals) if order.p else 0.0
    ma = next(vals) if order.q else 0.0
    sar = next(vals) if order.P else 0.0
    sma = next(vals) if order.Q else 0.0
    return ar, ma, sar, sma


def _hannan_rissanen(w, order):
    n = w.size
    k = order.n_coef
    if k == 0:
        return np.zeros(0)
    h = int(min(max(order.m + 2, round(math.log(n) ** 2)), n // 3))
    ehat = np.zeros(n)
    if h >= 1 and n > 2 * h:
        X = np.column_stack([w[h - i - 1:n - i - 1] for i in range(h)])
        coef, *_ = np.linalg.lstsq(X, w[h:], rcond=None)
        ehat[h:] = w[h:] - X @ coef
    cols = []
    if order.p:
        cols.append((w, 1))
    if order.q:
        cols.append((ehat, 1))
    if order.P:
        cols.append((w, order.m))
    if order.Q:
        cols.append((ehat, order.m))
    start = max(lag for _, lag in cols) + h
    if n - start < k + 1:
        return np.zeros(k)
    X = np.column_stack([src[start - lag:n - lag] for src, lag in cols])
    coef, *_ = np.linalg.lstsq(X, w[start:], rcond=None)
    # regression signs follow w_t = phi w_{t-1} + theta e_{t-1}; both match our parametrization
    return np.clip(coef, -0.95, 0.95)


def fit_sarima(series, order, max_iter=2000):
    """CSS fit: Hannan-Rissanen start refined by Nelder-Mead."""
    y = np.asarray(series, dtype=float)
    w, _ = difference_with_initials(y, order.d, order.D, order.m)
    k = order.n_coef
    t0 = _start(order)
    n = w.size - t0
    if n < max(3 * k, 1) or n < 1:
        raise SeriesTooShortError(f"{w.size} differenced values are too few for {k} coefficients")

    def sse(theta):
        if np.any(np.abs(theta) >= 1.0):
            return PENALTY * (1.0 + float(np.sum(np.abs(theta))))
        e = css_residuals(w, order, *_unpack(order, theta))
        return float(e @ e)

    init = _hannan_rissanen(w, order)
    init_sse = sse(init)
    best, converged = init, True
    if k:
        res = optimize.minimize(sse, init, method="Nelder-Mead",
                                options={"maxiter": max_iter, "xatol": 1e-8, "fatol": 1e-12})
        converged = bool(res.success)
        if res.fun <= init_sse:
            best = np.asarray(res.x)
    best_sse = sse(best)
    ar, ma, sar, sma = _unpack(order, best)
    resid = css_residuals(w, order, ar, ma, sar, sma)
    return SarimaFit(order, ar, ma, sar, sma, best_sse / n, best_sse, _aic(best_sse, n, k), resid, y,
                     converged, _aic(init_sse, n, k))


def candidate_orders(m_range=M_RANGE):
    for m in m_range:
        for p, q, P, D, Q in itertools.product((0, 1), repeat=5):
            yield SarimaOrder(p=p, d=1, q=q, P=P, D=D, Q=Q, m=m)


def selection_key(fit):
    return (fit.aic, fit.order.n_coef, fit.order.m, fit.order.key)


def select_by_aic(series, m_range=M_RANGE):
    """Minimum-AIC fit over the order grid; ties go to fewer coefficients, then smaller m."""
    fits = []
    for order in candidate_orders(m_range):
        try:
            fits.append(fit_sarima(series, order))
        except SeriesTooShortError:
            continue
    if not fits:
        raise ValueError("no candidate order could be fitted")
    return min(fits, key=selection_key)


def _full_ar(fit):
    o = fit.order
    poly = ar_polynomial(o, fit.ar, fit.sar)
    for lag in _lags(o.d, o.D, o.m):
        poly = np.convolve(poly, _poly(-1.0, lag))
    return poly


def psi_weights(fit, h):
    """MA(infinity) weights of the integrated model, first ``h`` terms."""
    a = _full_ar(fit)
    c = ma_polynomial(fit.order, fit.ma, fit.sma)
    psi = np.zeros(h)
    for j in range(h):
        v = c[j] if j < c.size else 0.0
        for k in range(1, min(j, a.size - 1) + 1):
            v -= a[k] * psi[j - k]
        psi[j] = v
    return psi


def forecast_interval(fit, h, level=0.95):
    """Recursive point forecasts with Gaussian intervals from accumulated psi-weights."""
    if h < 1:
        raise ValueError("forecast horizon must be at least 1")
    if not 0.0 < level < 1.0:
        raise ValueError("level must lie in (0, 1)")
    o = fit.order
    y = list(fit.series)
    n0 = len(y)
    a = _full_ar(fit)
    c = ma_polynomial(o, fit.ma, fit.sma)
    e = np.zeros(n0 + h)
    offset = n0 - fit.residuals.size
    e[offset:n0] = fit.residuals
    for step in range(h):
        t = n0 + step
        v = 0.0
        for k in range(1, a.size):
            if t - k >= 0:
                v -= a[k] * y[t - k]
        for k in range(1, c.size):
            if t - k >= 0:
                v += c[k] * e[t - k]
        y.append(v)
    point = np.array(y[n0:])
    psi = psi_weights(fit, h)
    sd = np.sqrt(max(fit.sigma2, 0.0) * np.cumsum(psi ** 2))
    z = float(stats.norm.ppf(0.5 + level / 2.0))
    return Forecast(h, point, point - z * sd, point + z * sd, level)
