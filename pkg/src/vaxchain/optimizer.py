"""Rolling-horizon decomposition heuristics.

Each period a regional master LP fixes doses per region, then a flow
subproblem splits them over sub-regions and mass-vaccination centers, routes
them through the supply chain and prices the result. A budget switch and
period rollback keep cumulative spending within the budget.

Routing is just-in-time. A region's hub receives doses ``region_lead``
periods before administration; sub-regional doses move on immediately and
wait at the sub-regional hub until the last-mile shipment to the cheapest
pharmacy leaves. Center doses wait at the regional hub.
"""
from dataclasses import dataclass, field

import numpy as np

from . import epidemic, lp
from .equity import plan_equity_report
from .scenario import AllocationPlan, compute_cost

KNAPSACK = "knapsack"
GINI = "gini"
BAND_FLOOR = 0.95
HORIZON, BUDGET_BAND, DOUBLE_INFEASIBLE = "horizon", "budget-band", "double-infeasible"
TIE_EPS = 1e-7


class RoutingError(ValueError):
    """The master asked for more doses than the network can administer."""

    def __init__(self, region, period, deficit):
        super().__init__(f"region {region} at period {period}: {deficit:.6g} doses exceed capacity")
        self.region = region
        self.period = period
        self.deficit = deficit


class MasterInfeasibleError(RuntimeError):
    pass


def optimality_gap(heuristic_obj, incumbent_obj):
    """Percent gap |heuristic - incumbent| / |incumbent|."""
    if incumbent_obj == 0:
        raise ValueError("optimality gap is undefined for a zero incumbent")
    return abs(heuristic_obj - incumbent_obj) / abs(incumbent_obj) * 100.0


def budget_switch(budget, spent, big_m):
    """0 while spending is within budget (boundary included), 1 once it is exceeded."""
    gap = budget - spent
    if not big_m > abs(gap):
        raise ValueError(f"big-M {big_m!r} must exceed |B - C| = {abs(gap)!r}")
    return 0 if gap >= 0 else 1


def unit_cost_estimate(scenario, j, t):
    """Per-dose cost guess for region ``j`` at ``t``.

    Dose price weighted by the previous period's supplier capacity, plus mean
    hub-to-sub-region transport, mean last-mile transport and regional holding.
    """
    s, c = scenario.supply, scenario.costs
    cap = s.supplier_capacity[:, t - 1] if t >= 1 else s.supplier_capacity[:, 0]
    if cap.sum() <= 0:
        raise ValueError(f"zero supplier capacity before period {t}")
    price = float(c.dose_cost[:, t] @ cap / cap.sum())
    subs = np.flatnonzero(scenario.sub_region == j)
    g2 = float(c.transport_2[subs].mean()) if subs.size else 0.0
    g3 = 0.0
    if subs.size:
        g3 = float(np.mean([c.transport_3[scenario.pharm_sub == k].mean() if np.any(scenario.pharm_sub == k) else 0.0
                            for k in subs]))
    return price + g2 + g3 + float(c.holding_1[j])


def unit_cost_table(scenario):
    """Estimates for every (region, period); NaN where supplier capacity is zero."""
    out = np.full((scenario.n_regions, scenario.horizon), np.nan)
    for t in range(scenario.horizon):
        for j in range(scenario.n_regions):
            try:
                out[j, t] = unit_cost_estimate(scenario, j, t)
            except ValueError:
                pass
    return out


def _reference_unit_cost(table):
    means = [np.nanmean(row) for row in table if np.any(~np.isnan(row))]
    if not means:
        raise ValueError("no period has positive supplier capacity")
    return float(min(means))


def affordability_factor(alpha, budget, spent, unit_costs):
    """Multiplier on available supply in the master's aggregate cap."""
    if not alpha:
        return 1.0
    room = budget - spent
    if room <= 0:
        return 0.0
    return _reference_unit_cost(unit_costs) / room


# sub-regional splits

def allocate_subregions(delta, caps, pops, total, lam_reg=0.0):
    """Split ``total`` doses over sub-regions.

    Maximizes sum(delta * x) + lam_reg * nu with x <= caps and x >= nu * pops.
    The objective is concave piecewise linear in nu, so every breakpoint is
    tried and the best one kept (smallest nu on ties). Returns ``(x, nu)``
    where nu is the realized minimum per-capita allocation.
    """
    delta = np.asarray(delta, dtype=float)
    caps = np.asarray(caps, dtype=float)
    pops = np.asarray(pops, dtype=float)
    total = float(total)
    if total > caps.sum() * (1 + 1e-12) + 1e-9:
        raise lp.InfeasibleError(f"total {total!r} exceeds capacity {caps.sum()!r}")
    total = min(total, float(caps.sum()))
    if total <= 0:
        return np.zeros_like(caps), 0.0
    if lam_reg <= 0:
        x = lp.solve_greedy_knapsack(delta, np.zeros_like(caps), caps, total)
        return x, float(np.min(x / pops))
    nu_max = min(float(np.min(caps / pops)), total / float(pops.sum()))
    cands = {0.0, nu_max}
    cands.update(float(v) for v in caps / pops if v <= nu_max)
    order = np.lexsort((np.arange(delta.size), -delta))
    pref_cap = np.concatenate([[0.0], np.cumsum(caps[order])])
    pref_pop = np.concatenate([[0.0], np.cumsum(pops[order])])
    rest = pops.sum() - pref_pop
    for m in range(delta.size):
        if rest[m] > 0:
            nu = (total - pref_cap[m]) / rest[m]
            if 0.0 <= nu <= nu_max:
                cands.add(float(nu))
    best = None
    for nu in sorted(cands):
        lower = np.minimum(nu * pops, caps)
        x = lp.solve_greedy_knapsack(delta, lower, caps, total)
        value = float(delta @ x) + lam_reg * nu
        if best is None or value > best[0] + 1e-12 * max(1.0, abs(best[0])):
            best = (value, x, nu)
    x = best[1]
    return x, float(np.min(x / pops))


def equalizing_split(prev, caps, pops, total):
    """Split ``total`` to minimize the pairwise per-capita spread of cumulative coverage.

    Solves the linearized Gini LP: minimize sum v_mn with
    v_mn >= |u_m - u_n| and u = (prev + x) / pops.
    """
    prev = np.asarray(prev, dtype=float)
    caps = np.asarray(caps, dtype=float)
    pops = np.asarray(pops, dtype=float)
    n = caps.size
    total = min(float(total), float(caps.sum()))
    if total <= 0:
        return np.zeros(n)
    if n == 1:
        return np.array([total])
    pairs = [(m, k) for m in range(n) for k in range(m + 1, n)]
    P = len(pairs)
    scale = pops.mean()
    w = scale / pops
    A = np.zeros((1 + 2 * P, n + P))
    b = np.zeros(1 + 2 * P)
    A[0, :n] = 1.0
    b[0] = total
    for r, (m, k) in enumerate(pairs):
        d = prev[m] * w[m] - prev[k] * w[k]
        for sign, row in ((1.0, 1 + 2 * r), (-1.0, 2 + 2 * r)):
            A[row, m] = sign * w[m]
            A[row, k] = -sign * w[k]
            A[row, n + r] = -1.0
            b[row] = -sign * d
    c = np.concatenate([np.zeros(n), -np.ones(P)])
    hi = np.concatenate([caps, np.full(P, np.inf)])
    sol = lp.solve_lp(lp.LinearProgram(c, A, ("=",) + ("<=",) * (2 * P), b, hi=hi))
    if sol.status != lp.OPTIMAL:
        raise MasterInfeasibleError(f"equalizing split LP is {sol.status}")
    x = np.clip(sol.x[:n], 0.0, caps)
    return x * (total / x.sum()) if x.sum() > 0 else x


# master problem

@dataclass(frozen=True)
class MasterDecision:
    t: int
    psi: np.ndarray
    xi: np.ndarray
    x: np.ndarray
    ups_i: np.ndarray
    ups_d: np.ndarray
    zeta: float
    alpha: int
    shipments: np.ndarray
    cap_total: float = np.inf
    objective: float = 0.0

    @property
    def totals(self):
        return self.psi + self.xi


def _committed_plan(scenario, arrays):
    return AllocationPlan(**arrays)


def _region_capacity(scenario, plan, t):
    """Local capacity and center capacity (after wastage) per region at t."""
    s = scenario.supply
    J = scenario.n_regions
    local = np.zeros(J)
    if scenario.n_subregions:
        np.add.at(local, scenario.sub_region, s.local_capacity[:, t])
    center = np.zeros(J)
    l0 = int(s.lead_center)
    if scenario.n_centers and t >= l0:
        np.add.at(center, scenario.center_region, (1.0 - s.wastage) * s.center_capacity[:, t] * plan.x[:, t - l0])
    return local, center


def _choose_centers(scenario, plan, t, fired, alpha):
    x = np.zeros(scenario.n_centers)
    if alpha or t < scenario.supply.lead_center:
        return x
    T = scenario.horizon
    kappa_t = min(t + int(scenario.supply.lead_center), T - 1)
    for j in np.flatnonzero(fired):
        idx = np.flatnonzero(scenario.center_region == j)
        if idx.size == 0:
            continue
        prev_open = idx[plan.x[idx, t - 1] > 0.5] if t >= 1 else idx[:0]
        if prev_open.size:
            x[prev_open[0]] = 1.0
        else:
            kap = scenario.supply.center_capacity[idx, kappa_t]
            x[idx[int(np.argmax(kap))]] = 1.0
    return x


def solve_master_period(scenario, t, alpha, committed, spent=0.0, variant=KNAPSACK, unit_costs=None):
    """Regional doses for period ``t`` given the plan committed so far.

    Triggers are read off the projected trajectory; centers are opened per the
    bracket rule before the LP. The LP maximizes a per-dose infection benefit
    (the infection pressure at the first period a dose affects), the equity
    floor and, for the knapsack variant, the mean regional priority weight.
    """
    e, s, c = scenario.epidemic, scenario.supply, scenario.costs
    J, M, T = scenario.n_regions, scenario.n_suppliers, scenario.horizon
    w = scenario.weights
    keep = 1.0 - s.wastage
    N = e.pop_region
    run = epidemic.run(scenario, committed.psi, committed.xi)

    l0 = int(s.lead_center)
    ups_i = np.zeros(J)
    ups_d = np.zeros(J)
    if t >= l0:
        ups_i = (run.flux[:, t] > run.tau[:, t]).astype(float)
        local_t, _ = _region_capacity(scenario, committed, t)
        ups_d = (local_t < s.demand[:, t]).astype(float)
    x_open = _choose_centers(scenario, committed, t, ups_i + ups_d > 0, alpha)

    local, center = _region_capacity(scenario, committed, t)
    used = (committed.psi + committed.xi).sum(axis=1)
    ub = np.maximum(np.minimum.reduce([s.demand[:, t], local + center, N - used]), 0.0)

    lag = e.dose_lag
    s_av = run.s_avail[:, t + lag] if t + lag < T else run.S[:, T]
    r_av = run.r_avail[:, t]
    psi_hi = np.maximum(np.minimum(s_av, ub), 0.0)
    xi_hi = np.maximum(np.minimum(r_av, ub), 0.0)

    hit = t + lag + 1
    benefit = np.zeros(J)
    if hit <= T - 1:
        benefit = -w.lambda0 * e.beta[:, hit] * run.I[:, hit]
        if w.normalize:
            base = float(e.init_I.sum() + e.init_R.sum())
            if base > 0:
                benefit = benefit / base
    fill = np.zeros(J)
    if variant == KNAPSACK and scenario.n_subregions:
        sums = np.bincount(scenario.sub_region, weights=scenario.priority, minlength=J)
        counts = np.bincount(scenario.sub_region, minlength=J)
        fill = w.lambda22 * sums / np.maximum(counts, 1)
        if w.normalize:
            fill = fill / N
    floor_w = w.lambda21 if variant == KNAPSACK else w.lambda11

    # sourcing: supplier i ships at s_ij = t - region_lead_j - lead_1_ij
    arrive = t - scenario.region_lead
    pairs = [(i, j, int(arrive[j] - s.lead_1[i, j])) for j in range(J) for i in range(M)
             if arrive[j] >= 0 and arrive[j] - s.lead_1[i, j] >= 0]
    reachable = np.zeros(J, dtype=bool)
    for _, j, _ in pairs:
        reachable[j] = True
    psi_hi[~reachable] = 0.0
    xi_hi[~reachable] = 0.0

    shipped = committed.g1.sum(axis=1)
    residual = np.maximum(s.supplier_capacity - shipped, 0.0)
    inv_prev = float(committed.w1[:, t - 1].sum()) if t >= 1 else 0.0
    if unit_costs is None and alpha:
        unit_costs = unit_cost_table(scenario)
    factor = affordability_factor(alpha, c.budget, spent, unit_costs)
    cap_total = factor * (float(s.supplier_capacity[:, t].sum()) + inv_prev)

    P = len(pairs)
    n = 2 * J + P + 1
    zcol = n - 1
    nmax = float(N.max())
    scale = max(1e-300, float(np.max(np.abs(np.concatenate([benefit, fill, [floor_w / nmax]])))))
    cost = np.zeros(n)
    cost[:J] = benefit + fill + TIE_EPS * scale
    cost[J:2 * J] = fill
    if P:
        unit = np.array([c.dose_cost[i, sp] + c.transport_1[i, j] for i, j, sp in pairs])
        cost[2 * J:2 * J + P] = -TIE_EPS * scale * unit / max(1.0, float(unit.max()))
    cost[zcol] = floor_w / nmax

    rows, senses, rhs = [], [], []

    def row():
        r = np.zeros(n)
        rows.append(r)
        return r

    for j in range(J):
        r = row()
        r[j] = r[J + j] = 1.0
        senses.append("<=")
        rhs.append(ub[j])
        r = row()
        r[j] = r[J + j] = -1.0
        for p, (i, jj, _) in enumerate(pairs):
            if jj == j:
                r[2 * J + p] = keep
        senses.append("=")
        rhs.append(0.0)
        r = row()
        r[zcol] = N[j] / nmax
        r[j] = r[J + j] = -1.0
        senses.append("<=")
        rhs.append(0.0)
    groups = {}
    for p, (i, _, sp) in enumerate(pairs):
        groups.setdefault((i, sp), []).append(p)
    for (i, sp), members in sorted(groups.items()):
        r = row()
        r[[2 * J + p for p in members]] = 1.0
        senses.append("<=")
        rhs.append(residual[i, sp])
    if np.isfinite(cap_total):
        r = row()
        r[:2 * J] = 1.0
        senses.append("<=")
        rhs.append(max(cap_total, 0.0))
    hi = np.concatenate([psi_hi, xi_hi, np.full(P, np.inf), [np.inf]])
    sol = lp.solve_lp(lp.LinearProgram(cost, np.array(rows), tuple(senses), np.array(rhs), hi=hi))
    if sol.status != lp.OPTIMAL:
        raise MasterInfeasibleError(f"master LP at period {t} is {sol.status}")
    psi = np.clip(sol.x[:J], 0.0, psi_hi)
    xi = np.clip(sol.x[J:2 * J], 0.0, xi_hi)
    tot = psi + xi
    ships = np.zeros((M, J))
    for p, (i, j, _) in enumerate(pairs):
        ships[i, j] = max(sol.x[2 * J + p], 0.0)
    for j in range(J):
        col = ships[:, j].sum()
        ships[:, j] = ships[:, j] * (tot[j] / keep / col) if col > 0 else 0.0
    zeta = float(np.min(tot / N)) if J else 0.0
    return MasterDecision(t, psi, xi, x_open, ups_i, ups_d, zeta, int(alpha), ships, cap_total,
                          float(sol.objective))


def zero_decision(scenario, t, alpha, base):
    """A decision that administers nothing but keeps the period's triggers."""
    J, M = scenario.n_regions, scenario.n_suppliers
    return MasterDecision(t, np.zeros(J), np.zeros(J), np.zeros(scenario.n_centers),
                          base.ups_i, base.ups_d, 0.0, int(alpha), np.zeros((M, J)), 0.0)


# flow subproblem

@dataclass(frozen=True)
class FlowResult:
    plan: AllocationPlan
    increment: float
    sub_doses: np.ndarray
    cross_checks: int = 0
    worst_cross_check: float = 0.0


def _split_region(scenario, j, total, committed, t, variant, do_check):
    s = scenario.supply
    subs = np.flatnonzero(scenario.sub_region == j)
    if subs.size == 0:
        return subs, np.zeros(0), 0.0, None
    caps = s.local_capacity[subs, t]
    sub_total = min(total, float(caps.sum()))
    pops = scenario.epidemic.pop_sub[subs]
    if variant == GINI:
        prev = (committed.phi + committed.omega)[subs].sum(axis=1)
        return subs, equalizing_split(prev, caps, pops, sub_total), 0.0, None
    w = scenario.weights
    delta = scenario.priority[subs]
    if w.normalize:
        delta = delta / scenario.epidemic.pop_region[j]
    x, nu = allocate_subregions(delta, caps, pops, sub_total, w.lambda_reg)
    report = None
    if do_check and sub_total > 0:
        lower = np.minimum(x, np.minimum(nu * pops, caps))
        report = lp.cross_check(delta, lower, caps, sub_total, raise_on_mismatch=True)
    return subs, x, nu, report


def solve_flow_subproblem(scenario, decision, committed, variant=KNAPSACK, cross_check=True):
    """Split, route and price one master decision on top of ``committed``."""
    s = scenario.supply
    t = decision.t
    keep = 1.0 - s.wastage
    arrays = {k: np.array(v) for k, v in committed.as_dict().items()}
    local, center = _region_capacity(scenario, committed, t)
    tot = decision.totals
    K = scenario.n_subregions
    sub_doses = np.zeros(K)
    checks, worst = 0, 0.0
    cheapest = scenario.cheapest_pharmacy
    for j in range(scenario.n_regions):
        if tot[j] <= 0:
            continue
        deficit = tot[j] - (local[j] + center[j])
        if deficit > 1e-9 * max(1.0, tot[j]):
            raise RoutingError(scenario.regions[j], t, deficit)
        subs, x, nu, report = _split_region(scenario, j, float(tot[j]), committed, t, variant, cross_check)
        if report is not None:
            checks += 1
            worst = max(worst, report.relative_difference)
        a = t - int(scenario.region_lead[j])
        for i in range(scenario.n_suppliers):
            if decision.shipments[i, j] > 0:
                arrays["g1"][i, j, a - int(s.lead_1[i, j])] += decision.shipments[i, j]
        share = decision.psi[j] / tot[j]
        for k, dose in zip(subs, x):
            if dose <= 0:
                continue
            sub_doses[k] = dose
            l = cheapest[k]
            amount = dose / keep
            arrays["g2"][k, a] += amount
            send = t - int(s.lead_3[l])
            arrays["w2"][k, a + int(s.lead_2[k]):send] += amount
            arrays["g3"][l, send] += amount
            arrays["phi"][k, t] += share * dose
            arrays["omega"][k, t] += (1.0 - share) * dose
        center_doses = max(float(tot[j] - x.sum()), 0.0)
        if center_doses > 0:
            arrays["w1"][j, a:t] += center_doses / keep
        if variant == KNAPSACK:
            arrays["nu"][j, t] = nu
    arrays["psi"][:, t] = decision.psi
    arrays["xi"][:, t] = decision.xi
    arrays["x"][:, t] = decision.x
    arrays["ups_i"][:, t] = decision.ups_i
    arrays["ups_d"][:, t] = decision.ups_d
    arrays["zeta"][t] = decision.zeta
    arrays["alpha"][t] = decision.alpha
    plan = AllocationPlan(**arrays)
    inc = compute_cost(scenario, plan).total - compute_cost(scenario, committed).total
    return FlowResult(plan, inc, sub_doses, checks, worst)


# temporal loop

@dataclass(frozen=True)
class DecompositionDiagnostics:
    variant: str
    increments: np.ndarray
    unit_costs: np.ndarray
    alpha_history: tuple
    backtracks: tuple
    termination: str
    accepted_periods: int
    total_cost: float
    budget: float
    tail: tuple = ()
    cross_checks: int = 0
    worst_cross_check: float = 0.0
    gini_residual: float = None
    notes: tuple = field(default_factory=tuple)

    @property
    def cumulative(self):
        return np.cumsum(self.increments)

    @property
    def backtrack_count(self):
        return len(self.backtracks)


def _decompose(scenario, variant, cross_check):
    B = float(scenario.costs.budget)
    T = scenario.horizon
    big_m = max(scenario.big_m, 10.0 * B)
    unit_costs = unit_cost_table(scenario)
    plan = AllocationPlan.zeros(scenario)
    spent = 0.0
    increments = np.zeros(T)
    alphas, backtracks, notes = [], [], []
    termination = HORIZON
    checks, worst = 0, 0.0
    stop_at = T
    for t in range(T):
        alpha = budget_switch(B, spent, big_m)
        dec = solve_master_period(scenario, t, alpha, plan, spent, variant, unit_costs)
        res = solve_flow_subproblem(scenario, dec, plan, variant, cross_check)
        if spent + res.increment > B:
            backtracks.append(t)
            if alphas and alphas[-1] == 1:
                termination = DOUBLE_INFEASIBLE
                stop_at = t
                break
            dec = solve_master_period(scenario, t, 1, plan, spent, variant, unit_costs)
            res = solve_flow_subproblem(scenario, dec, plan, variant, cross_check)
            if spent + res.increment > B:
                notes.append(f"period {t}: affordability cap still over budget; nothing administered")
                dec = zero_decision(scenario, t, 1, dec)
                res = solve_flow_subproblem(scenario, dec, plan, variant, cross_check)
        plan = res.plan
        spent += res.increment
        increments[t] = res.increment
        alphas.append(dec.alpha)
        checks += res.cross_checks
        worst = max(worst, res.worst_cross_check)
        if BAND_FLOOR * B <= spent <= B:
            termination = BUDGET_BAND
            stop_at = t + 1
            break
    tail = []
    if termination == BUDGET_BAND:
        shadow = plan
        for t in range(stop_at, T):
            dec = solve_master_period(scenario, t, 0, shadow, spent, variant, unit_costs)
            tail.append(dec)
            psi = np.array(shadow.psi)
            xi = np.array(shadow.xi)
            psi[:, t], xi[:, t] = dec.psi, dec.xi
            shadow = shadow.replace(psi=psi, xi=xi)
    trajectory = epidemic.simulate(scenario, plan)
    diag = DecompositionDiagnostics(
        variant=variant, increments=increments, unit_costs=unit_costs, alpha_history=tuple(alphas),
        backtracks=tuple(backtracks), termination=termination, accepted_periods=len(alphas),
        total_cost=compute_cost(scenario, plan).total, budget=B, tail=tuple(tail),
        cross_checks=checks, worst_cross_check=worst, notes=tuple(notes),
    )
    return plan, trajectory, diag


def run_knapsack_decomposition(scenario, cross_check=True):
    """Knapsack-variant decomposition; returns ``(plan, trajectory, diagnostics)``."""
    return _decompose(scenario, KNAPSACK, cross_check)


def run_gini_decomposition(scenario):
    """Gini-variant decomposition; returns ``(plan, trajectory, diagnostics, gini_report)``.

    The lower level equalizes cumulative per-capita coverage within each
    region period by period. Diagnostics carry the leftover budget measured in
    doses at the cheapest regional unit cost.
    """
    plan, trajectory, diag = _decompose(scenario, GINI, cross_check=False)
    ref = _reference_unit_cost(diag.unit_costs)
    residual = (diag.budget - diag.total_cost) / ref
    diag = DecompositionDiagnostics(**{**diag.__dict__, "gini_residual": residual})
    return plan, trajectory, diag, plan_equity_report(scenario, plan)
