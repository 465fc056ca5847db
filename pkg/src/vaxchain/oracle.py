"""Exhaustive reference optimizer for tiny instances.

Decisions are enumerated on a grid of regional dose totals per (region,
period), together with every center choice and, optionally, the budget
relaxation flag per period. Each complete sequence is routed with the same
flow subproblem the heuristics use, simulated, checked and scored; the best
feasible one wins, earliest in enumeration order on ties.

Subtrees that are illegal (center rules), unroutable or over budget are
skipped but still counted, so the visited count always equals the product of
the option counts.
"""
import math
from dataclasses import dataclass

import numpy as np

from . import epidemic
from .optimizer import GINI, KNAPSACK, MasterDecision, RoutingError, solve_flow_subproblem
from .scenario import AllocationPlan, check_full_feasibility, compute_cost, evaluate_objectives

DEFAULT_GUARD = 10_000_000
DEFAULT_DIVISIONS = 10


def _count(n):
    digits = str(int(n))
    if len(digits) <= 6:
        return digits
    return f"{digits[0]}.{digits[1:4]}e{len(digits) - 1}"


class GuardExceededError(RuntimeError):
    def __init__(self, projected, guard):
        super().__init__(f"oracle enumeration would visit {_count(projected)} plans, above the guard of {guard:.4g}")
        self.projected = projected
        self.guard = guard


@dataclass(frozen=True)
class GridSpec:
    """Dose grid per period: multiples of ``step[t]`` up to the bound, plus the bound itself.

    ``step`` defaults to one tenth of the period's total supplier capacity.
    """

    step: tuple = None
    guard: float = DEFAULT_GUARD
    budget_relaxation: bool = False

    def steps(self, scenario):
        if self.step is not None:
            st = np.broadcast_to(np.asarray(self.step, dtype=float), (scenario.horizon,))
        else:
            st = scenario.supply.supplier_capacity.sum(axis=0) / DEFAULT_DIVISIONS
        if np.any(st < 0):
            raise ValueError("grid step must be positive")
        return st


@dataclass(frozen=True)
class OracleResult:
    plan: AllocationPlan
    trajectory: object
    value: float
    visited: int
    evaluated: int
    predicted: int
    slack: float


def dose_bounds(scenario):
    """Static per-(region, period) upper bound on regional doses."""
    s, e = scenario.supply, scenario.epidemic
    J, T = scenario.n_regions, scenario.horizon
    local = np.zeros((J, T))
    if scenario.n_subregions:
        np.add.at(local, scenario.sub_region, s.local_capacity)
    center = np.zeros((J, T))
    if scenario.n_centers:
        l0 = int(s.lead_center)
        kap = np.array(s.center_capacity)
        kap[:, :min(l0, T)] = 0.0
        for o, j in enumerate(scenario.center_region):
            center[j] = np.maximum(center[j], (1.0 - s.wastage) * kap[o])
    ub = np.minimum.reduce([s.demand, local + center, np.broadcast_to(e.pop_region[:, None], (J, T))])
    supply_max = s.supplier_capacity.sum(axis=0).max(initial=0.0) * (1.0 - s.wastage)
    ub = np.minimum(ub, supply_max)
    arrive = np.arange(T)[None, :] - scenario.region_lead[:, None]
    reach = np.zeros((J, T), dtype=bool)
    for j in range(J):
        for t in range(T):
            reach[j, t] = arrive[j, t] >= 0 and np.any(arrive[j, t] - scenario.supply.lead_1[:, j] >= 0)
    return np.where(reach, np.maximum(ub, 0.0), 0.0)


def dose_levels(scenario, grid):
    ub = dose_bounds(scenario)
    steps = grid.steps(scenario)
    levels = []
    for j in range(scenario.n_regions):
        row = []
        for t in range(scenario.horizon):
            top, st = ub[j, t], steps[t]
            if top <= 0 or st <= 0:
                row.append((0.0,))
                continue
            pts = list(np.arange(0.0, top, st))
            if not pts or pts[-1] < top:
                pts.append(float(top))
            row.append(tuple(float(p) for p in pts))
        levels.append(row)
    return levels


def _center_options(scenario, j, t):
    opts = [None]
    if t >= scenario.supply.lead_center:
        opts += list(np.flatnonzero(scenario.center_region == j))
    return opts


def predicted_count(scenario, grid):
    """Number of decision sequences the oracle will visit."""
    levels = dose_levels(scenario, grid)
    alphas = 2 if grid.budget_relaxation else 1
    total = 1
    for t in range(scenario.horizon):
        total *= alphas
        for j in range(scenario.n_regions):
            total *= len(levels[j][t]) * len(_center_options(scenario, j, t))
    return total


def marginal_bound(scenario, objective=KNAPSACK):
    """Upper bound on the scalarized objective change per administered dose."""
    e, w = scenario.epidemic, scenario.weights
    T = scenario.horizon
    contact = float(np.max(e.beta * e.pop_region[:, None], initial=0.0))
    chain = sum(contact ** k for k in range(T))
    infection = abs(w.lambda0) * chain
    if w.normalize:
        base = float(e.init_I.sum() + e.init_R.sum())
        if base > 0:
            infection /= base
    min_pop = float(e.pop_region.min())
    if objective == KNAPSACK:
        prio = float(np.max(scenario.priority, initial=0.0))
        if w.normalize:
            prio /= min_pop
        rest = abs(w.lambda21) / min_pop + abs(w.lambda22) * (prio + abs(w.lambda_reg) / float(e.pop_sub.min()))
    else:
        rest = abs(w.lambda11) / min_pop + abs(w.lambda12) * 2.0 / float(e.pop_sub.min())
    return infection + rest


def grid_slack(scenario, grid, objective=KNAPSACK):
    """Resolution slack: one grid step in every (region, period) at the marginal bound."""
    step = float(np.max(grid.steps(scenario), initial=0.0))
    return step * scenario.n_regions * scenario.horizon * marginal_bound(scenario, objective)


def _ship(scenario, plan, t, totals):
    """Cheapest-first supplier assignment; None when supply runs short."""
    s, c = scenario.supply, scenario.costs
    keep = 1.0 - s.wastage
    M, J = scenario.n_suppliers, scenario.n_regions
    residual = np.maximum(s.supplier_capacity - plan.g1.sum(axis=1), 0.0)
    ships = np.zeros((M, J))
    for j in range(J):
        need = totals[j] / keep
        if need <= 0:
            continue
        a = t - int(scenario.region_lead[j])
        opts = sorted((c.dose_cost[i, a - s.lead_1[i, j]] + c.transport_1[i, j], i)
                      for i in range(M) if a - s.lead_1[i, j] >= 0)
        for _, i in opts:
            sp = int(a - s.lead_1[i, j])
            q = min(need, residual[i, sp])
            ships[i, j] += q
            residual[i, sp] -= q
            need -= q
        if need > 1e-9 * max(1.0, totals[j]):
            return None
    return ships


class _Search:
    def __init__(self, scenario, grid, objective):
        self.s = scenario
        self.grid = grid
        self.objective = objective
        self.levels = dose_levels(scenario, grid)
        self.alphas = (0, 1) if grid.budget_relaxation else (0,)
        J, T = scenario.n_regions, scenario.horizon
        self.per_period = []
        for t in range(T):
            combos = len(self.alphas)
            for j in range(J):
                combos *= len(self.levels[j][t]) * len(_center_options(scenario, j, t))
            self.per_period.append(combos)
        self.below = [math.prod(self.per_period[t + 1:]) for t in range(T)]
        self.visited = 0
        self.evaluated = 0
        self.best = None

    def period_choices(self, t):
        J = self.s.n_regions
        per_region = [[(lv, xo) for lv in self.levels[j][t] for xo in _center_options(self.s, j, t)]
                      for j in range(J)]
        for alpha in self.alphas:
            yield from ((alpha, combo) for combo in _product(per_region))

    def decision(self, plan, t, alpha, combo):
        s, e = self.s, self.s.epidemic
        J = s.n_regions
        run = epidemic.run(s, plan.psi, plan.xi)
        l0 = int(s.supply.lead_center)
        ups_i = np.zeros(J)
        ups_d = np.zeros(J)
        if t >= l0:
            ups_i = (run.flux[:, t] > run.tau[:, t]).astype(float)
            local = np.zeros(J)
            np.add.at(local, s.sub_region, s.supply.local_capacity[:, t])
            ups_d = (local < s.supply.demand[:, t]).astype(float)
        x = np.zeros(s.n_centers)
        totals = np.array([lv for lv, _ in combo])
        for j, (_, xo) in enumerate(combo):
            fired = ups_i[j] + ups_d[j]
            if xo is None:
                if (1 - alpha) * fired / 2.0 > 0 and np.any(s.center_region == j):
                    return None
            else:
                if fired == 0:
                    return None
                x[xo] = 1.0
        lag = e.dose_lag
        T = s.horizon
        s_av = run.s_avail[:, t + lag] if t + lag < T else run.S[:, T]
        r_av = run.r_avail[:, t]
        psi = np.minimum(totals, np.maximum(s_av, 0.0))
        xi = totals - psi
        if np.any(xi > np.maximum(r_av, 0.0) + 1e-9):
            return None
        used = (plan.psi + plan.xi).sum(axis=1)
        if np.any(used + totals > e.pop_region * (1 + 1e-12)):
            return None
        ships = _ship(s, plan, t, totals)
        if ships is None:
            return None
        zeta = float(np.min(totals / e.pop_region))
        return MasterDecision(t, psi, xi, x, ups_i, ups_d, zeta, alpha, ships)

    def search(self, plan, t):
        T = self.s.horizon
        if t == T:
            self.visited += 1
            self.leaf(plan)
            return
        budget = float(self.s.costs.budget)
        for alpha, combo in self.period_choices(t):
            dec = self.decision(plan, t, alpha, combo)
            if dec is None:
                self.visited += self.below[t]
                continue
            try:
                res = solve_flow_subproblem(self.s, dec, plan, self.objective, cross_check=False)
            except RoutingError:
                self.visited += self.below[t]
                continue
            if compute_cost(self.s, res.plan).total > budget:
                self.visited += self.below[t]
                continue
            self.search(res.plan, t + 1)

    def leaf(self, plan):
        traj = epidemic.simulate(self.s, plan)
        if not check_full_feasibility(self.s, plan, traj).feasible:
            return
        self.evaluated += 1
        value = evaluate_objectives(self.s, plan, traj, self.objective).scalarized
        if self.best is None or value > self.best[0]:
            self.best = (value, plan, traj)


def _product(lists):
    if not lists:
        yield ()
        return
    for head in lists[0]:
        for tail in _product(lists[1:]):
            yield (head,) + tail


def enumerate_optimum(scenario, grid=None, objective=KNAPSACK):
    """Grid-best plan for ``scenario`` under the scalarized ``objective`` (maximized)."""
    if objective not in (KNAPSACK, GINI):
        raise ValueError(f"unknown objective {objective!r}")
    grid = grid or GridSpec()
    predicted = predicted_count(scenario, grid)
    if predicted > grid.guard:
        raise GuardExceededError(predicted, grid.guard)
    search = _Search(scenario, grid, objective)
    search.search(AllocationPlan.zeros(scenario), 0)
    if search.best is None:
        raise RuntimeError("no feasible plan on the grid")
    value, plan, traj = search.best
    return OracleResult(plan, traj, value, search.visited, search.evaluated, predicted,
                        grid_slack(scenario, grid, objective))


@dataclass(frozen=True)
class OracleComparison:
    heuristic: float
    oracle: float
    slack: float
    gap: float

    @property
    def within_slack(self):
        return self.heuristic <= self.oracle + self.slack


def compare_with_oracle(scenario, plan, grid=None, objective=KNAPSACK, result=None):
    from .optimizer import optimality_gap

    result = result or enumerate_optimum(scenario, grid, objective)
    traj = epidemic.simulate(scenario, plan)
    h = evaluate_objectives(scenario, plan, traj, objective).scalarized
    return OracleComparison(h, result.value, result.slack, optimality_gap(h, result.value))


def gap_against_oracle(scenario, plan, grid=None, objective=KNAPSACK):
    """Percent optimality gap of ``plan`` against the grid optimum."""
    return compare_with_oracle(scenario, plan, grid, objective).gap
