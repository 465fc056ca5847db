import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import base_doc, build
from vaxchain import equity
from vaxchain.scenario import AllocationPlan

nonneg = st.lists(st.floats(0, 1e6, allow_subnormal=False), min_size=1, max_size=30)


def test_gini_examples():
    assert equity.gini_coefficient([1, 1, 1]) == 0.0
    assert equity.gini_coefficient([0, 1]) == 0.5
    assert equity.gini_coefficient([0, 0, 0]) == 0.0
    with pytest.raises(ValueError):
        equity.gini_coefficient([1, -1])


def test_gini_matches_pairwise_definition():
    u = np.array([0.3, 0.1, 0.7, 0.7, 0.0])
    direct = equity.pairwise_differences(u).sum() / (2 * u.mean() * u.size ** 2)
    assert equity.gini_coefficient(u) == pytest.approx(direct, rel=1e-14)


@given(nonneg, st.floats(1e-3, 1e3))
def test_gini_scale_invariant(u, c):
    assert equity.gini_coefficient(np.array(u) * c) == pytest.approx(equity.gini_coefficient(u), abs=1e-9)


@given(nonneg, st.randoms(use_true_random=False))
def test_gini_permutation_invariant(u, rnd):
    v = list(u)
    rnd.shuffle(v)
    assert equity.gini_coefficient(v) == pytest.approx(equity.gini_coefficient(u), abs=1e-12)


@given(nonneg)
def test_gini_in_unit_interval(u):
    assert 0.0 <= equity.gini_coefficient(u) <= 1.0


def test_svi_bins_quartiles():
    np.testing.assert_array_equal(equity.svi_bins([0.0, 0.25, 0.26, 0.5, 0.75, 0.9]), [1, 1, 2, 2, 3, 4])


def test_component_examples():
    c = equity.county_priority_components([0.9, 0.1], [2.0, 1.0], [100, 50], [0, 0])
    assert (c.d_svi[0], c.d_beta[0], c.d_pop[0]) == (1.0, 1.0, 1.0)
    c = equity.county_priority_components([0.3, 0.8], [1.0, 1.0], [1, 1], [0, 0])
    np.testing.assert_array_equal(c.d_svi, [0.5, 1.0])
    c = equity.county_priority_components([0.3], [0.2], [7], [0])
    assert (c.d_svi[0], c.d_beta[0], c.d_pop[0]) == (1.0, 1.0, 1.0)
    with pytest.raises(ValueError, match="region 1"):
        equity.county_priority_components([0.3], [0.2], [7], [0], n_groups=2)


def test_weight_examples():
    ones = equity.county_priority_components([0.9], [1.0], [1.0], [0])
    assert equity.priority_weights(ones, [0.0]).d[0] == pytest.approx(math.sqrt(3), rel=1e-12)
    twins = equity.county_priority_components([0.4, 0.4], [1.0, 1.0], [5, 5], [0, 0])
    np.testing.assert_allclose(equity.priority_weights(twins, [0.2]).rho, [0.5, 0.5])
    np.testing.assert_array_equal(equity.priority_weights(twins, [1.0]).delta, [0.0, 0.0])


@settings(max_examples=50)
@given(st.integers(1, 4), st.lists(st.tuples(st.floats(0, 1), st.floats(0.01, 1), st.floats(1, 1e5)),
                                   min_size=1, max_size=12), st.floats(0, 1))
def test_weight_invariants(n_groups, rows, access):
    groups = np.array([i % n_groups for i in range(len(rows))])
    present = np.unique(groups)
    remap = np.searchsorted(present, groups)
    svi, beta0, pop = (np.array(col) for col in zip(*rows))
    comp = equity.county_priority_components(svi, beta0, pop, remap)
    w = equity.priority_weights(comp, np.full(present.size, access))
    np.testing.assert_allclose(np.bincount(remap, weights=w.rho), 1.0, atol=1e-12)
    assert np.all((w.delta >= 0) & (w.delta <= 1))
    for g in range(present.size):
        idx = remap == g
        if access < 1:
            assert np.argmax(w.delta[idx]) == np.argmax(w.rho[idx])


def _report(psi, phi, J=2, K=1, T=1, pop_sub=1000.0):
    s = build(base_doc(J=J, K=K, T=T, pop_sub=pop_sub))
    return s, equity.plan_equity_report(s, AllocationPlan.from_arrays(s, psi=psi, phi=phi))


def test_zero_plan_report():
    s = build(base_doc(J=2, K=2, T=3))
    r = equity.plan_equity_report(s, AllocationPlan.zeros(s))
    assert np.all(r.u == 0) and np.all(r.zeta == 0) and r.eta == 0


def test_proportional_plan_has_zero_gini():
    d = base_doc(J=1, K=3, T=1)
    d["epidemic"]["pop"].update({"r0": 6000.0, "r0k0": 1000.0, "r0k1": 2000.0, "r0k2": 3000.0})
    s = build(d)
    r = equity.plan_equity_report(s, AllocationPlan.from_arrays(s, phi=[[10.0], [20.0], [30.0]]))
    assert r.eta == 0.0


def test_zeta_takes_regional_minimum():
    _, r = _report([[100.0], [300.0]], [[100.0], [300.0]])
    assert r.zeta[0] == pytest.approx(0.1)


def test_eta_bounds_each_region():
    d = base_doc(J=2, K=3, T=1)
    s = build(d)
    phi = np.array([[1.0], [5.0], [9.0], [2.0], [2.0], [3.0]])
    r = equity.plan_equity_report(s, AllocationPlan.from_arrays(s, phi=phi))
    assert r.eta == max(r.gini) > 0
    np.testing.assert_allclose(r.pairwise(s.sub_region, 0), equity.pairwise_differences(r.u[:3]))
