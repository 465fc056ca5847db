import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from vaxchain import forecast as fc
from vaxchain.forecast import SarimaOrder


def ar1_levels(seed, n=200, phi=0.6, burn=50):
    """Integrated AR(1): differences follow w_t = phi w_{t-1} + e_t."""
    rng = np.random.default_rng(seed)
    e = rng.standard_normal(n + burn)
    w = np.zeros(n + burn)
    for t in range(1, n + burn):
        w[t] = phi * w[t - 1] + e[t]
    return np.concatenate([[0.0], np.cumsum(w[burn:])])


def test_difference_examples():
    np.testing.assert_array_equal(fc.seasonal_difference([1, 2, 4, 7], 1, 0, 1), [1, 2, 3])
    assert np.all(fc.seasonal_difference([5.0] * 6, 1, 0, 1) == 0)
    assert np.all(fc.seasonal_difference([1, 2, 3, 1, 2, 3, 1, 2], 0, 1, 3) == 0)
    with pytest.raises(fc.SeriesTooShortError):
        fc.seasonal_difference([1.0, 2.0], 1, 1, 2)
    with pytest.raises(ValueError):
        fc.seasonal_difference([1.0, np.nan, 2.0], 1, 0, 1)


@given(st.lists(st.floats(-1e6, 1e6), min_size=12, max_size=40), st.integers(0, 2), st.integers(0, 1),
       st.integers(1, 4))
def test_integration_inverts_differencing(series, d, D, m):
    diffed, initials = fc.difference_with_initials(series, d, D, m)
    np.testing.assert_allclose(fc.integrate(diffed, initials, d, D, m), series, rtol=1e-9, atol=1e-6)


def test_order_validation():
    with pytest.raises(ValueError):
        SarimaOrder(p=2)
    with pytest.raises(ValueError):
        SarimaOrder(m=0)
    assert str(SarimaOrder(p=1, Q=1, m=4)) == "(1,1,0)(0,0,1)_4"


def test_random_walk_fit_has_no_coefficients():
    y = np.cumsum(np.random.default_rng(5).standard_normal(60))
    fit = fc.fit_sarima(y, SarimaOrder())
    w = np.diff(y)
    assert fit.coefficients == ()
    assert fit.sse == pytest.approx(float(w @ w))
    assert fit.aic == pytest.approx(w.size * np.log(fit.sse / w.size) + 2)


def test_ar1_recovered_at_fixed_seed():
    fit = fc.fit_sarima(ar1_levels(0), SarimaOrder(p=1))
    assert abs(fit.ar - 0.6) <= 0.15


def test_refinement_never_worse_than_start():
    for seed in range(10):
        y = ar1_levels(seed, n=80)
        for order in (SarimaOrder(p=1), SarimaOrder(q=1), SarimaOrder(p=1, q=1, P=1, m=4)):
            fit = fc.fit_sarima(y, order)
            assert fit.aic <= fit.initial_aic + 1e-12


def test_selection_is_exhaustive_argmin():
    y = ar1_levels(3, n=60)
    best = fc.select_by_aic(y, m_range=range(1, 4))
    fits = [fc.fit_sarima(y, o) for o in fc.candidate_orders(range(1, 4))]
    assert len(fits) == 96
    assert best.aic == min(f.aic for f in fits)
    assert fc.selection_key(best) == min(fc.selection_key(f) for f in fits)


def test_constant_series_forecasts_constant():
    y = np.full(30, 0.25)
    fit = fc.select_by_aic(y, m_range=range(1, 3))
    assert all(c == 0 for c in fit.coefficients) or fit.sse == 0
    out = fc.forecast_interval(fit, 5)
    np.testing.assert_allclose(out.point, 0.25, atol=1e-12)


def test_exact_fit_repeats_seasonal_pattern():
    pattern = [1.0, 4.0, 2.0, 8.0]
    fit = fc.fit_sarima(pattern * 6, SarimaOrder(D=1, m=4))
    assert fit.sse == 0.0
    np.testing.assert_allclose(fc.forecast_interval(fit, 8).point, pattern * 2)


def test_no_drift_term():
    y = 3.0 + 0.5 * np.arange(20)
    out = fc.forecast_interval(fc.fit_sarima(y, SarimaOrder()), 3)
    np.testing.assert_allclose(out.point, [12.5] * 3)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000))
def test_interval_widens_with_horizon(seed):
    fit = fc.fit_sarima(ar1_levels(seed, n=60), SarimaOrder(p=1, Q=1, m=3))
    out = fc.forecast_interval(fit, 12)
    width = out.upper - out.lower
    assert np.all(np.diff(width) >= -1e-12)
    assert np.all(out.lower <= out.point) and np.all(out.point <= out.upper)


def test_normal_quantile_at_95():
    fit = fc.fit_sarima(ar1_levels(1, n=40), SarimaOrder())
    out = fc.forecast_interval(fit, 1)
    z = (out.upper[0] - out.point[0]) / np.sqrt(fit.sigma2)
    assert z == pytest.approx(1.959964, abs=1e-6)
    with pytest.raises(ValueError):
        fc.forecast_interval(fit, 0)
