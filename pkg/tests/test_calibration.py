import numpy as np
import pytest
from hypothesis import given, strategies as st

from vaxchain import calibration as cal
from vaxchain import epidemic, synthetic
from vaxchain.calibration import ObservedSeries
from vaxchain.scenario import AllocationPlan


def test_underreporting_examples():
    assert cal.adjust_underreporting(100, 0) == 100
    assert cal.adjust_underreporting(100, 0.5) == 200
    assert cal.adjust_underreporting(7, 0.3) == pytest.approx(10)
    with pytest.raises(ValueError):
        cal.adjust_underreporting(1, 1.0)


@given(st.floats(0, 1e6), st.floats(0, 1e6), st.floats(0, 0.99), st.floats(0, 0.99))
def test_underreporting_monotone(c1, c2, r1, r2):
    lo_c, hi_c = sorted((c1, c2))
    lo_r, hi_r = sorted((r1, r2))
    assert cal.adjust_underreporting(lo_c, lo_r) <= cal.adjust_underreporting(hi_c, lo_r)
    assert cal.adjust_underreporting(lo_c, lo_r) <= cal.adjust_underreporting(lo_c, hi_r)


def test_reproduction_number():
    assert cal.effective_reproduction(3.0, 1.0, 10.0, 10.0) == 0.0
    assert cal.effective_reproduction(2.0, 1.0, 5.0, 10.0) == 1.0


def test_silent_epidemic_gives_zero_rates():
    params = synthetic.preset("tiny", 0).epidemic
    obs = ObservedSeries(("a", "b"), np.zeros((2, 5)), np.zeros((2, 5)), np.array([1000.0, 2000.0]))
    rates = cal.calibrate_effective_rates(obs, params)
    assert np.all(rates.beta == 0.0)
    np.testing.assert_allclose(rates.S[0], 999.0 * (1 - params.mu) ** np.arange(6) + 1000 * (1 - (1 - params.mu) ** np.arange(6)))


def test_silent_epidemic_keeps_susceptibles_without_recruitment():
    from dataclasses import replace

    params = replace(synthetic.preset("tiny", 0).epidemic, mu=1e-300)
    obs = ObservedSeries(("a",), np.zeros((1, 4)), np.zeros((1, 4)), np.array([500.0]))
    rates = cal.calibrate_effective_rates(obs, params)
    np.testing.assert_allclose(rates.S[0], 499.0)


def test_vaccinated_rate_is_twenty_percent():
    params = synthetic.preset("tiny", 0).epidemic
    obs = ObservedSeries(("a",), np.full((1, 4), 5.0), np.zeros((1, 4)), np.array([1000.0]))
    rates = cal.calibrate_effective_rates(obs, params, reduction=0.8)
    np.testing.assert_allclose(rates.beta_vax, 0.2 * rates.beta, rtol=1e-15)


def _seeded_truth(seed):
    """Scenario seeded with one infection, plus a dosing plan within the susceptible stock."""
    from dataclasses import replace

    s = synthetic.preset("tiny", seed)
    e = s.epidemic
    s = s.replace(epidemic=replace(e, init_I=np.ones(s.n_regions), init_R=np.zeros(s.n_regions),
                                   beta=e.beta * 2, beta_vax=e.beta_vax * 2))
    base = epidemic.simulate(s, AllocationPlan.zeros(s))
    psi = np.zeros((s.n_regions, s.horizon))
    psi[:, :-1] = 0.01 * base.S[:, 1:-1]
    return s, psi


def test_round_trip_recovers_rates():
    s, psi = _seeded_truth(3)
    traj = epidemic.simulate(s, AllocationPlan.from_arrays(s, psi=psi))
    obs = ObservedSeries(s.regions, traj.new_infections, psi, s.epidemic.pop_region)
    rates = cal.calibrate_effective_rates(obs, s.epidemic)
    np.testing.assert_allclose(rates.beta, s.epidemic.beta, rtol=1e-8)
    np.testing.assert_allclose(rates.S, traj.S, rtol=1e-9)
    assert rates.issues == ()


def test_scale_covariance_after_seeding():
    s = synthetic.preset("midsize", 3)
    rng = np.random.default_rng(1)
    cases = rng.uniform(100, 1000, (6, 8))
    doses = rng.uniform(0, 500, (6, 8))
    pop = s.epidemic.pop_region
    one = cal.calibrate_effective_rates(ObservedSeries(s.regions, cases, doses, pop), s.epidemic)
    two = cal.calibrate_effective_rates(ObservedSeries(s.regions, 2 * cases, 2 * doses, 2 * pop), s.epidemic)
    # the single seed infection does not scale, so the first period is excluded
    np.testing.assert_allclose(two.beta[:, 1:], one.beta[:, 1:] / 2, rtol=1e-4)


def test_singular_period_flagged_and_optionally_filled():
    params = synthetic.preset("tiny", 0).epidemic
    cases = np.array([[5.0, 0.0, 3.0, 4.0]])
    # I collapses to zero after a zero-case period at full removal, making S*I singular
    obs = ObservedSeries(("a",), cases, np.zeros((1, 4)), np.array([1000.0]))
    rates = cal.calibrate_effective_rates(obs, params)
    assert rates.missing[0, 2]
    assert [(i.region, i.period, i.kind) for i in rates.errors()] == [("a", 2, "singular")]
    filled = cal.calibrate_effective_rates(obs, params, interpolate=True)
    assert filled.beta[0, 2] == pytest.approx((filled.beta[0, 1] + filled.beta[0, 3]) / 2)


def test_negative_rate_flagged_not_clamped():
    params = synthetic.preset("tiny", 0).epidemic
    # doses beyond the susceptible stock drive S negative, and the next solve returns a negative rate
    obs = ObservedSeries(("a",), np.array([[1.0, 1.0, 1.0]]), np.array([[200.0, 0.0, 0.0]]), np.array([100.0]))
    rates = cal.calibrate_effective_rates(obs, params)
    negative = [i for i in rates.issues if i.kind == "negative"]
    assert negative and negative[0].period == 2
    assert rates.beta[0, 2] < 0


def test_solver_rejects_tiny_pivot():
    with pytest.raises(cal.SingularSystemError):
        cal.solve3(np.zeros((3, 3)), np.ones(3))
