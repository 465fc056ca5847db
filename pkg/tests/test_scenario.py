import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import base_doc, build
from vaxchain import epidemic
from vaxchain.scenario import (AllocationPlan, IndexMismatchError, ObjectiveWeights, Trajectory,
                               check_full_feasibility, compute_cost, evaluate_objectives, opening_events,
                               validate_scenario)


def test_well_formed_two_region_scenario_is_valid():
    assert validate_scenario(build(base_doc(J=2, K=2))).feasible


def test_vaccinated_rate_above_base_rate_fails_beta_ordering():
    d = base_doc(beta=1e-4)
    d["epidemic"]["beta_vax"] = {"r0": [2e-4, 2e-4]}
    report = validate_scenario(build(d))
    assert not report.feasible
    assert not report.family("beta ordering").passed


def test_population_shortfall_reported_with_its_size():
    d = base_doc(K=2)
    d["epidemic"]["pop"]["r0"] = 2000.0 + 5.0
    report = validate_scenario(build(d))
    fam = report.family("population sum")
    assert not report.feasible
    assert fam.worst == pytest.approx(5.0)


def test_zero_plan_costs_nothing():
    s = build(base_doc(budget=777.0))
    ledger = compute_cost(s, AllocationPlan.zeros(s))
    assert ledger.total == 0.0
    assert ledger.slack == 777.0


def test_single_supplier_flow_cost():
    d = base_doc(T=1)
    d["costs"]["transport_1"] = {"m0": {"r0": 1.0}}
    s = build(d)
    plan = AllocationPlan.from_arrays(s, g1=np.full((1, 1, 1), 100.0))
    assert compute_cost(s, plan).total == pytest.approx(1100.0)


def test_opening_cost_charged_once_per_opening():
    d = base_doc(T=3)
    d["costs"]["open_cost"] = {"r0o0": 5000.0}
    s = build(d)
    plan = AllocationPlan.from_arrays(s, x=np.array([[0.0, 1.0, 1.0]]))
    assert compute_cost(s, plan).opening.sum() == 5000.0
    np.testing.assert_array_equal(opening_events([[1, 0, 1]]), [[1, 0, 1]])


def test_cost_rejects_mismatched_plan():
    s = build(base_doc(T=2))
    other = build(base_doc(T=3))
    with pytest.raises(IndexMismatchError, match="plan.psi"):
        compute_cost(s, AllocationPlan.zeros(other))


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(0, 1e3), min_size=2, max_size=2), st.lists(st.floats(0, 1e3), min_size=2, max_size=2))
def test_cost_is_additive_over_disjoint_periods(a, b):
    d = base_doc(T=2)
    d["costs"]["admin_cost"] = {"r0": [3.0, 5.0]}
    d["costs"]["transport_1"] = {"m0": {"r0": 0.7}}
    s = build(d)
    pa = AllocationPlan.from_arrays(s, psi=[[a[0], 0.0]], g1=[[[a[1], 0.0]]])
    pb = AllocationPlan.from_arrays(s, psi=[[0.0, b[0]]], g1=[[[0.0, b[1]]]])
    both = AllocationPlan.from_arrays(s, psi=[[a[0], b[0]]], g1=[[[a[1], b[1]]]])
    assert compute_cost(s, both).total == pytest.approx(compute_cost(s, pa).total + compute_cost(s, pb).total)


def test_objectives_vanish_without_infection_or_doses():
    s = build(base_doc(beta=0.0))
    plan = AllocationPlan.zeros(s)
    ov = evaluate_objectives(s, plan, epidemic.simulate(s, plan))
    assert (ov.infection_flux_total, ov.min_percapita_sum, ov.gini_max, ov.knapsack_value) == (0, 0, 0, 0)
    assert ov.scalarized == 0


def test_weights_stored_verbatim():
    w = ObjectiveWeights.from_tuple((-1, 1e2, 1e-3, 10))
    assert (w.lambda0, w.lambda21, w.lambda22, w.lambda_reg) == (-1.0, 100.0, 0.001, 10.0)


def test_scalarized_hand_sum():
    d = base_doc(T=2)
    d["weights"] = {"lambda0": -1.0, "lambda11": 0.0, "lambda12": 0.0, "lambda21": 0.0, "lambda22": 0.0,
                    "lambda_reg": 0.0}
    s = build(d)
    z = np.zeros((1, 3))
    traj = Trajectory(z, z, z, z, z, np.array([[3.0, 4.0]]), np.zeros((1, 2)))
    assert evaluate_objectives(s, AllocationPlan.zeros(s), traj).scalarized == -7.0


@settings(max_examples=30, deadline=None)
@given(st.floats(-10, 10), st.floats(-10, 10))
def test_scalarized_linear_in_each_weight(w1, w2):
    d = base_doc(T=2, beta=1e-4)
    s0 = build(d)
    plan = AllocationPlan.from_arrays(s0, psi=[[5.0, 0.0]], phi=[[5.0, 0.0]], zeta=[0.005, 0.0])
    traj = epidemic.simulate(s0, plan)

    def value(lam):
        dd = dict(d, weights={"lambda0": lam, "lambda21": 1.0, "lambda22": 1.0, "lambda_reg": 0.0})
        return evaluate_objectives(build(dd), plan, traj).scalarized

    base = value(0.0)
    assert value(w1 + w2) - base == pytest.approx((value(w1) - base) + (value(w2) - base), abs=1e-6)


def test_zero_plan_is_feasible(tiny):
    plan = AllocationPlan.zeros(tiny)
    assert check_full_feasibility(tiny, plan, epidemic.simulate(tiny, plan)).feasible


def test_demand_violation_located():
    d = base_doc(T=2, J=2)
    d["supply"]["demand"] = {"r0": [50.0, 50.0], "r1": [50.0, 50.0]}
    s = build(d)
    plan = AllocationPlan.from_arrays(s, psi=[[0.0, 0.0], [0.0, 80.0]])
    report = check_full_feasibility(s, plan, epidemic.simulate(s, plan))
    fam = report.family("demand")
    assert not fam.passed
    assert fam.locus == {"region": "r1", "period": 1}


def test_trajectory_mismatch_caught(tiny):
    plan = AllocationPlan.zeros(tiny)
    traj = epidemic.simulate(tiny, plan)
    bumped = Trajectory(traj.S + 1.0, traj.V, traj.I, traj.R, traj.Itilde, traj.new_infections, traj.tau)
    assert not check_full_feasibility(tiny, plan, bumped).family("state recursion").passed
