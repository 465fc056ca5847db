"""Domain types, cost accounting, objective evaluation and feasibility checking.

Compartments and doses are person counts. Arrays follow a fixed canonical
order: regions as listed, sub-regions region by region, pharmacies
sub-region by sub-region, centers region by region. Period-indexed arrays put
the period on the last axis.
"""
import math
from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np

from . import equity

DEFAULT_PERIOD_DAYS = 14
LIFE_EXPECTANCY_YEARS = 75
DEFAULT_CENTER_CAPACITY = 10_000.0
DEFAULT_TOL = 1e-6


def default_mu(period_days=DEFAULT_PERIOD_DAYS):
    """Per-period recruitment rate for the given period length in days."""
    return period_days / (LIFE_EXPECTANCY_YEARS * 365)


class IndexMismatchError(ValueError):
    """A plan or parameter array does not match the scenario's index sets."""


def _frozen(a, dtype=float):
    arr = np.array(a, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


def _check_shape(name, arr, shape):
    if arr.shape != tuple(shape):
        raise IndexMismatchError(f"{name} has shape {arr.shape}, expected {tuple(shape)}")


@dataclass(frozen=True)
class EpidemicParams:
    beta: np.ndarray
    beta_vax: np.ndarray
    pop_region: np.ndarray
    pop_sub: np.ndarray
    init_I: np.ndarray
    init_Itilde: np.ndarray
    init_R: np.ndarray
    sigma: np.ndarray
    mu: float = default_mu()
    gamma: float = 1.0
    gamma1: float = 1.0
    psi: int = 0
    t_r: int = 1

    def __post_init__(self):
        for name in ("beta", "beta_vax", "pop_region", "pop_sub", "init_I", "init_Itilde", "init_R", "sigma"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))

    @property
    def dose_lag(self):
        return max(1, math.ceil(1.0 / self.gamma1 - 1e-12))


@dataclass(frozen=True)
class SupplyParams:
    supplier_capacity: np.ndarray
    local_capacity: np.ndarray
    demand: np.ndarray
    center_capacity: np.ndarray
    lead_1: np.ndarray
    lead_2: np.ndarray
    lead_3: np.ndarray
    lead_center: int = 1
    wastage: float = 0.0

    def __post_init__(self):
        for name in ("supplier_capacity", "local_capacity", "demand", "center_capacity"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))
        for name in ("lead_1", "lead_2", "lead_3"):
            object.__setattr__(self, name, _frozen(getattr(self, name), dtype=int))


@dataclass(frozen=True)
class CostParams:
    budget: float
    dose_cost: np.ndarray
    admin_cost: np.ndarray
    transport_1: np.ndarray
    transport_2: np.ndarray
    transport_3: np.ndarray
    holding_1: np.ndarray
    holding_2: np.ndarray
    holding_3: np.ndarray
    open_cost: np.ndarray

    def __post_init__(self):
        for name in ("dose_cost", "admin_cost", "transport_1", "transport_2", "transport_3",
                     "holding_1", "holding_2", "holding_3", "open_cost"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))


@dataclass(frozen=True)
class ObjectiveWeights:
    lambda0: float = -1.0
    lambda11: float = 100.0
    lambda12: float = 1.0
    lambda21: float = 100.0
    lambda22: float = 1e-3
    lambda_reg: float = 10.0
    normalize: bool = False

    def __post_init__(self):
        vals = (self.lambda0, self.lambda11, self.lambda12, self.lambda21, self.lambda22, self.lambda_reg)
        if not all(math.isfinite(v) for v in vals):
            raise ValueError("objective weights must be finite")
        if not any(v != 0 for v in vals):
            raise ValueError("at least one objective weight must be nonzero")

    @classmethod
    def from_tuple(cls, values, variant="knapsack", normalize=False):
        """Build weights from a (lambda0, a, b, reg) tuple.

        For the knapsack variant a and b are the regional floor and knapsack
        weights; for the gini variant they are the floor and Gini weights.
        """
        l0, la, lb, lreg = (float(v) for v in values)
        if variant == "knapsack":
            return cls(lambda0=l0, lambda21=la, lambda22=lb, lambda_reg=lreg, normalize=normalize)
        if variant == "gini":
            return cls(lambda0=l0, lambda11=la, lambda12=lb, lambda_reg=lreg, normalize=normalize)
        raise ValueError(f"unknown objective variant {variant!r}")


@dataclass(frozen=True)
class Scenario:
    horizon: int
    suppliers: tuple
    regions: tuple
    subregions_of: dict
    pharmacies_of: dict
    centers_of: dict
    epidemic: EpidemicParams
    supply: SupplyParams
    costs: CostParams
    weights: ObjectiveWeights
    svi: np.ndarray
    access: np.ndarray
    sub_beta0: np.ndarray = None
    period_length_days: int = DEFAULT_PERIOD_DAYS

    def __post_init__(self):
        object.__setattr__(self, "suppliers", tuple(self.suppliers))
        object.__setattr__(self, "regions", tuple(self.regions))
        for name in ("subregions_of", "pharmacies_of", "centers_of"):
            object.__setattr__(self, name, {k: tuple(v) for k, v in getattr(self, name).items()})
        subs = tuple(k for j in self.regions for k in self.subregions_of.get(j, ()))
        pharms = tuple(p for k in subs for p in self.pharmacies_of.get(k, ()))
        centers = tuple(o for j in self.regions for o in self.centers_of.get(j, ()))
        object.__setattr__(self, "subregions", subs)
        object.__setattr__(self, "pharmacies", pharms)
        object.__setattr__(self, "centers", centers)
        r_pos = {j: n for n, j in enumerate(self.regions)}
        s_pos = {k: n for n, k in enumerate(subs)}
        object.__setattr__(self, "sub_region", _frozen(
            [r_pos[j] for j in self.regions for _ in self.subregions_of.get(j, ())], int))
        object.__setattr__(self, "pharm_sub", _frozen(
            [s_pos[k] for k in subs for _ in self.pharmacies_of.get(k, ())], int))
        object.__setattr__(self, "center_region", _frozen(
            [r_pos[j] for j in self.regions for _ in self.centers_of.get(j, ())], int))
        object.__setattr__(self, "svi", _frozen(self.svi))
        object.__setattr__(self, "access", _frozen(self.access))
        if self.sub_beta0 is None:
            b0 = np.asarray(self.epidemic.beta)[:, 0] if self.epidemic.beta.size else np.zeros(self.n_regions)
            object.__setattr__(self, "sub_beta0", _frozen(b0[self.sub_region]))
        else:
            object.__setattr__(self, "sub_beta0", _frozen(self.sub_beta0))
        self._check_shapes()

    def _check_shapes(self):
        J, K, L, O, M, T = self.n_regions, self.n_subregions, self.n_pharmacies, self.n_centers, self.n_suppliers, self.horizon
        e, s, c = self.epidemic, self.supply, self.costs
        for name, arr, shape in (
            ("epidemic.beta", e.beta, (J, T)), ("epidemic.beta_vax", e.beta_vax, (J, T)),
            ("epidemic.pop (regions)", e.pop_region, (J,)), ("epidemic.pop (sub-regions)", e.pop_sub, (K,)),
            ("epidemic.init_I", e.init_I, (J,)), ("epidemic.init_Itilde", e.init_Itilde, (J,)),
            ("epidemic.init_R", e.init_R, (J,)), ("epidemic.sigma", e.sigma, (T,)),
            ("supply.supplier_capacity", s.supplier_capacity, (M, T)),
            ("supply.local_capacity", s.local_capacity, (K, T)), ("supply.demand", s.demand, (J, T)),
            ("supply.center_capacity", s.center_capacity, (O, T)), ("supply.lead_1", s.lead_1, (M, J)),
            ("supply.lead_2", s.lead_2, (K,)), ("supply.lead_3", s.lead_3, (L,)),
            ("costs.dose_cost", c.dose_cost, (M, T)), ("costs.admin_cost", c.admin_cost, (J, T)),
            ("costs.transport_1", c.transport_1, (M, J)), ("costs.transport_2", c.transport_2, (K,)),
            ("costs.transport_3", c.transport_3, (L,)), ("costs.holding_1", c.holding_1, (J,)),
            ("costs.holding_2", c.holding_2, (K,)), ("costs.holding_3", c.holding_3, (L,)),
            ("costs.open_cost", c.open_cost, (O,)), ("svi", self.svi, (K,)), ("access", self.access, (J,)),
            ("sub_beta0", self.sub_beta0, (K,)),
        ):
            _check_shape(name, np.asarray(arr), shape)

    @property
    def n_regions(self):
        return len(self.regions)

    @property
    def n_subregions(self):
        return len(self.subregions)

    @property
    def n_pharmacies(self):
        return len(self.pharmacies)

    @property
    def n_centers(self):
        return len(self.centers)

    @property
    def n_suppliers(self):
        return len(self.suppliers)

    @property
    def T(self):
        return self.horizon

    @cached_property
    def big_m(self):
        """Big-M constant: ten times the largest regional population."""
        return 10.0 * float(np.max(self.epidemic.pop_region, initial=1.0))

    @cached_property
    def priority(self):
        """Knapsack priority weights (delta) per sub-region."""
        return equity.scenario_priority_weights(self).delta

    @cached_property
    def cheapest_pharmacy(self):
        """Per sub-region, the pharmacy index with the lowest last-mile cost (-1 if none)."""
        out = np.full(self.n_subregions, -1, dtype=int)
        cost = self.costs.transport_3
        for l in range(self.n_pharmacies - 1, -1, -1):
            k = self.pharm_sub[l]
            if out[k] < 0 or cost[l] <= cost[out[k]]:
                out[k] = l
        return out

    @cached_property
    def region_lead(self):
        """Per region, the longest hub-to-pharmacy lead over its routed pharmacies."""
        out = np.zeros(self.n_regions, dtype=int)
        lp = self.cheapest_pharmacy
        for k in range(self.n_subregions):
            if lp[k] >= 0:
                j = self.sub_region[k]
                out[j] = max(out[j], int(self.supply.lead_2[k] + self.supply.lead_3[lp[k]]))
        return out

    def replace(self, **changes):
        return replace(self, **changes)


@dataclass(frozen=True)
class EpidemicState:
    S: np.ndarray
    V: np.ndarray
    I: np.ndarray
    R: np.ndarray
    Itilde: np.ndarray


@dataclass(frozen=True)
class Trajectory:
    """Compartment paths with shape (regions, T+1); flux and thresholds (regions, T)."""

    S: np.ndarray
    V: np.ndarray
    I: np.ndarray
    R: np.ndarray
    Itilde: np.ndarray
    new_infections: np.ndarray
    tau: np.ndarray

    def __post_init__(self):
        for name in ("S", "V", "I", "R", "Itilde", "new_infections", "tau"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))

    @property
    def horizon(self):
        return self.new_infections.shape[1]

    def state(self, t):
        return EpidemicState(self.S[:, t], self.V[:, t], self.I[:, t], self.R[:, t], self.Itilde[:, t])


_PLAN_FIELDS = {
    "psi": ("J", "T"), "xi": ("J", "T"), "phi": ("K", "T"), "omega": ("K", "T"),
    "g1": ("M", "J", "T"), "g2": ("K", "T"), "g3": ("L", "T"),
    "w1": ("J", "T"), "w2": ("K", "T"), "w3": ("L", "T"),
    "x": ("O", "T"), "ups_i": ("J", "T"), "ups_d": ("J", "T"),
    "zeta": ("T",), "nu": ("J", "T"), "alpha": ("T",),
}


def _dims(scenario):
    return {"J": scenario.n_regions, "K": scenario.n_subregions, "L": scenario.n_pharmacies,
            "O": scenario.n_centers, "M": scenario.n_suppliers, "T": scenario.horizon}


@dataclass(frozen=True)
class AllocationPlan:
    """All decision quantities of one plan; doses are continuous, x and triggers binary."""

    psi: np.ndarray
    xi: np.ndarray
    phi: np.ndarray
    omega: np.ndarray
    g1: np.ndarray
    g2: np.ndarray
    g3: np.ndarray
    w1: np.ndarray
    w2: np.ndarray
    w3: np.ndarray
    x: np.ndarray
    ups_i: np.ndarray
    ups_d: np.ndarray
    zeta: np.ndarray
    nu: np.ndarray
    alpha: np.ndarray

    def __post_init__(self):
        for name in _PLAN_FIELDS:
            object.__setattr__(self, name, _frozen(getattr(self, name)))

    @classmethod
    def zeros(cls, scenario):
        d = _dims(scenario)
        return cls(**{name: np.zeros([d[a] for a in axes]) for name, axes in _PLAN_FIELDS.items()})

    @classmethod
    def from_arrays(cls, scenario, **arrays):
        """Zero plan overridden by the given arrays."""
        d = _dims(scenario)
        full = {name: np.zeros([d[a] for a in axes]) for name, axes in _PLAN_FIELDS.items()}
        for name, arr in arrays.items():
            if name not in full:
                raise IndexMismatchError(f"unknown plan field {name!r}")
            full[name] = np.asarray(arr, dtype=float)
        return cls(**full)

    def as_dict(self):
        return {name: getattr(self, name) for name in _PLAN_FIELDS}

    def replace(self, **changes):
        return replace(self, **changes)

    @property
    def regional_doses(self):
        return self.psi + self.xi

    @property
    def subregional_doses(self):
        return self.phi + self.omega


def plan_fields():
    return dict(_PLAN_FIELDS)


def check_plan_shape(scenario, plan):
    d = _dims(scenario)
    for name, axes in _PLAN_FIELDS.items():
        _check_shape(f"plan.{name}", getattr(plan, name), [d[a] for a in axes])


@dataclass(frozen=True)
class CostLedger:
    administration: np.ndarray
    purchase: np.ndarray
    transport_1: np.ndarray
    transport_2: np.ndarray
    transport_3: np.ndarray
    holding_1: np.ndarray
    holding_2: np.ndarray
    holding_3: np.ndarray
    opening: np.ndarray
    budget: float

    ITEMS = ("administration", "purchase", "transport_1", "transport_2", "transport_3",
             "holding_1", "holding_2", "holding_3", "opening")

    @property
    def per_period(self):
        return sum(getattr(self, name) for name in self.ITEMS)

    @property
    def cumulative(self):
        return np.cumsum(self.per_period)

    @property
    def total(self):
        return float(self.per_period.sum())

    @property
    def slack(self):
        return self.budget - self.total


def opening_events(x):
    """Per center and period, 1 where a center switches from closed to open."""
    x = np.asarray(x, dtype=float)
    prev = np.concatenate([np.zeros((x.shape[0], 1)), x[:, :-1]], axis=1)
    return np.maximum(x - prev, 0.0)


def compute_cost(scenario, plan):
    """Itemized supply-chain cost of ``plan`` with slack against the budget."""
    check_plan_shape(scenario, plan)
    c = scenario.costs
    admin = (c.admin_cost * (plan.psi + plan.xi)).sum(axis=0)
    purchase = (c.dose_cost[:, None, :] * plan.g1).sum(axis=(0, 1))
    t1 = (c.transport_1[:, :, None] * plan.g1).sum(axis=(0, 1))
    t2 = (c.transport_2[:, None] * plan.g2).sum(axis=0)
    t3 = (c.transport_3[:, None] * plan.g3).sum(axis=0)
    h1 = (c.holding_1[:, None] * plan.w1).sum(axis=0)
    h2 = (c.holding_2[:, None] * plan.w2).sum(axis=0)
    h3 = (c.holding_3[:, None] * plan.w3).sum(axis=0)
    T = scenario.horizon
    opening = (c.open_cost[:, None] * opening_events(plan.x)).sum(axis=0) if scenario.n_centers else np.zeros(T)
    z = np.zeros(T)
    return CostLedger(admin + z, purchase + z, t1 + z, t2 + z, t3 + z, h1 + z, h2 + z, h3 + z,
                      opening + z, float(c.budget))


@dataclass(frozen=True)
class ObjectiveValues:
    infection_flux_total: float
    min_percapita_sum: float
    gini_max: float
    knapsack_value: float
    scalarized_knapsack: float
    scalarized_gini: float
    variant: str = "knapsack"

    @property
    def scalarized(self):
        return self.scalarized_knapsack if self.variant == "knapsack" else self.scalarized_gini


def knapsack_terms(scenario, plan):
    """Per (region, period) knapsack objective value before the outer weight."""
    w = scenario.weights
    K = scenario.n_subregions
    J, T = scenario.n_regions, scenario.horizon
    sub_val = np.zeros((J, T))
    if K:
        np.add.at(sub_val, scenario.sub_region, scenario.priority[:, None] * (plan.phi + plan.omega))
    center_val = np.zeros((J, T))
    if scenario.n_centers:
        np.add.at(center_val, scenario.center_region, scenario.supply.center_capacity * plan.x)
    center_val *= (1.0 - scenario.access)[:, None]
    dose_terms = sub_val + center_val
    if w.normalize:
        dose_terms = dose_terms / scenario.epidemic.pop_region[:, None]
    return dose_terms + w.lambda_reg * plan.nu


def evaluate_objectives(scenario, plan, trajectory, variant="knapsack"):
    """Objective parts and both scalarizations for ``plan`` with its trajectory."""
    check_plan_shape(scenario, plan)
    if trajectory.horizon != scenario.horizon:
        raise IndexMismatchError(
            f"trajectory covers {trajectory.horizon} periods, plan covers {scenario.horizon}")
    if variant not in ("knapsack", "gini"):
        raise ValueError(f"unknown objective variant {variant!r}")
    w = scenario.weights
    flux = float(trajectory.new_infections.sum())
    infection_term = flux
    if w.normalize:
        base = float(scenario.epidemic.init_I.sum() + scenario.epidemic.init_R.sum())
        if base > 0:
            infection_term = flux / base
    zeta_sum = float(np.sum(plan.zeta))
    eta = equity.plan_equity_report(scenario, plan).eta
    knap = float(knapsack_terms(scenario, plan).sum())
    s_knap = w.lambda0 * infection_term + w.lambda21 * zeta_sum + w.lambda22 * knap
    s_gini = w.lambda0 * infection_term + w.lambda11 * zeta_sum - w.lambda12 * eta
    return ObjectiveValues(flux, zeta_sum, eta, knap, float(s_knap), float(s_gini), variant)


@dataclass(frozen=True)
class FamilyResult:
    name: str
    passed: bool
    worst: float
    relative: float
    locus: dict = field(default_factory=dict)


@dataclass(frozen=True)
class FeasibilityReport:
    families: tuple
    tol: float

    @property
    def feasible(self):
        return all(f.passed for f in self.families)

    def family(self, name):
        for f in self.families:
            if f.name == name:
                return f
        raise KeyError(name)

    @property
    def failures(self):
        return tuple(f for f in self.families if not f.passed)

    def summary(self):
        lines = []
        for f in self.families:
            where = ", ".join(f"{k}={v}" for k, v in f.locus.items())
            lines.append(f"{f.name}\t{'pass' if f.passed else 'FAIL'}\t{f.worst:.6g}\t{where}")
        return "\n".join(lines)


class _Collector:
    def __init__(self, scenario, tol):
        self.scenario = scenario
        self.tol = tol
        self.results = []
        self.axes = {
            "region": scenario.regions, "subregion": scenario.subregions,
            "pharmacy": scenario.pharmacies, "center": scenario.centers,
            "supplier": scenario.suppliers,
        }

    def add(self, name, violation, scale=1.0, axes=()):
        v = np.asarray(violation, dtype=float)
        if v.size == 0:
            self.results.append(FamilyResult(name, True, 0.0, 0.0))
            return
        s = np.broadcast_to(np.maximum(1.0, np.abs(np.asarray(scale, dtype=float))), v.shape)
        v = np.where(np.isnan(v), np.inf, np.maximum(v, 0.0))
        rel = v / s
        flat = int(np.argmax(rel))
        idx = np.unravel_index(flat, v.shape)
        worst, worst_rel = float(v[idx]), float(rel[idx])
        locus = {}
        if worst > 0:
            for axis, i in zip(axes, idx):
                ids = self.axes.get(axis)
                locus[axis] = ids[i] if ids is not None else int(i)
        self.results.append(FamilyResult(name, worst_rel <= self.tol, worst, worst_rel, locus))

    def report(self):
        return FeasibilityReport(tuple(self.results), self.tol)


def validate_scenario(scenario):
    """Structural checks on a scenario; always returns a report."""
    col = _Collector(scenario, DEFAULT_TOL)
    regions = set(scenario.regions)
    listed = {}
    orphan = 0.0
    for j, subs in scenario.subregions_of.items():
        if j not in regions:
            orphan += len(subs)
        for k in subs:
            listed[k] = listed.get(k, 0) + 1
    subs_known = set(scenario.subregions)
    p_listed = {}
    for k, ph in scenario.pharmacies_of.items():
        if k not in subs_known:
            orphan += len(ph)
        for p in ph:
            p_listed[p] = p_listed.get(p, 0) + 1
    for j in scenario.centers_of:
        if j not in regions:
            orphan += len(scenario.centers_of[j])
    dup = sum(n - 1 for n in listed.values()) + sum(n - 1 for n in p_listed.values())
    empty = sum(1 for j in scenario.regions if not scenario.subregions_of.get(j))
    empty += sum(1 for k in scenario.subregions if not scenario.pharmacies_of.get(k))
    col.add("hierarchy", np.array([orphan + dup + empty]))
    col.add("horizon", np.array([1.0 - scenario.horizon]))
    col.add("id sets", np.array([float(not scenario.suppliers) + float(not scenario.regions)]))

    e, s, c = scenario.epidemic, scenario.supply, scenario.costs
    col.add("beta ordering", e.beta_vax - e.beta, e.beta, ("region", "period"))
    neg = [e.beta, e.beta_vax, e.pop_region, e.pop_sub, e.init_I, e.init_Itilde, e.init_R, e.sigma,
           s.supplier_capacity, s.local_capacity, s.demand, s.center_capacity,
           s.lead_1, s.lead_2, s.lead_3, np.array([s.lead_center]),
           c.dose_cost, c.admin_cost, c.transport_1, c.transport_2, c.transport_3,
           c.holding_1, c.holding_2, c.holding_3, c.open_cost]
    worst_neg = max((float(np.max(-np.asarray(a, dtype=float), initial=0.0)) for a in neg), default=0.0)
    col.add("nonnegativity", np.array([worst_neg]))
    bad_rates = 0.0
    for v in (e.mu, e.gamma, e.gamma1):
        if not (v > 0 and math.isfinite(v)):
            bad_rates += 1
    if e.psi not in (0, 1):
        bad_rates += 1
    if not (0 <= s.wastage < 1):
        bad_rates += 1
    if not (c.budget > 0):
        bad_rates += 1
    bad_rates += float(np.sum((scenario.svi < 0) | (scenario.svi > 1)))
    bad_rates += float(np.sum((scenario.access < 0) | (scenario.access > 1)))
    col.add("parameter ranges", np.array([bad_rates]))
    init = np.maximum(e.init_I - e.pop_region, 0) + np.maximum(e.init_R - e.pop_region, 0) \
        + np.maximum(e.init_Itilde - e.pop_region, 0)
    col.add("initial counts", init, e.pop_region, ("region",))
    sub_sum = np.zeros(scenario.n_regions)
    if scenario.n_subregions:
        np.add.at(sub_sum, scenario.sub_region, e.pop_sub)
    col.add("population sum", np.abs(sub_sum - e.pop_region), e.pop_region, ("region",))
    return col.report()


def check_full_feasibility(scenario, plan, trajectory, tol=DEFAULT_TOL):
    """Check every constraint family of the knapsack formulation for ``plan``."""
    from . import epidemic

    check_plan_shape(scenario, plan)
    col = _Collector(scenario, tol)
    J, K, L, O, M, T = (scenario.n_regions, scenario.n_subregions, scenario.n_pharmacies,
                        scenario.n_centers, scenario.n_suppliers, scenario.horizon)
    e, s, c = scenario.epidemic, scenario.supply, scenario.costs
    N = e.pop_region
    keep = 1.0 - s.wastage

    # state recursion
    try:
        ref = epidemic.simulate(scenario, plan)
        diffs = np.zeros((J, T + 1))
        for name in ("S", "V", "I", "R"):
            diffs = np.maximum(diffs, np.abs(getattr(trajectory, name) - getattr(ref, name)))
        col.add("state recursion", diffs, N[:, None], ("region", "period"))
    except epidemic.StateUnderflowError as err:
        col.add("state recursion", np.array([err.magnitude]), np.array([1.0]))
    lowest = np.minimum.reduce([trajectory.S, trajectory.V, trajectory.I, trajectory.R])
    col.add("state nonnegativity", -lowest, N[:, None], ("region", "period"))

    arrays = plan.as_dict()
    neg = max(float(np.max(-arrays[n], initial=0.0)) for n in arrays)
    col.add("nonnegativity", np.array([neg]))

    binary = 0.0
    for n in ("x", "ups_i", "ups_d", "alpha"):
        a = arrays[n]
        binary = max(binary, float(np.max(np.minimum(np.abs(a), np.abs(a - 1.0)), initial=0.0)))
    col.add("binary", np.array([binary]))

    # triggers and openings
    # a plan may leave a trigger unset (forgoing openings) but never set one that did not fire
    ui, ud = epidemic.all_trigger_indicators(trajectory, scenario)
    col.add("trigger logic", np.maximum(plan.ups_i - ui, plan.ups_d - ud), 1.0, ("region", "period"))
    trig = plan.ups_i + plan.ups_d
    l0 = int(s.lead_center)
    if O:
        reg = scenario.center_region
        over = plan.x - trig[reg]
        early = np.zeros_like(plan.x)
        early[:, : min(l0, T)] = plan.x[:, : min(l0, T)]
        open_sum = np.zeros((J, T))
        np.add.at(open_sum, reg, plan.x)
        has_center = np.zeros(J, dtype=bool)
        has_center[reg] = True
        lower = (1.0 - plan.alpha)[None, :] * trig / 2.0
        lower[:, : min(l0, T)] = 0.0
        short = np.where(has_center[:, None], lower - open_sum, 0.0)
        opening = max(float(np.max(over, initial=0.0)), float(np.max(early, initial=0.0)),
                      float(np.max(open_sum - 1.0, initial=0.0)), float(np.max(short, initial=0.0)))
        col.add("opening logic", np.array([opening]))
    else:
        col.add("opening logic", np.zeros(1))

    admin = plan.psi + plan.xi
    col.add("population", admin.sum(axis=1) - N, N, ("region",))
    col.add("demand", admin - s.demand, s.demand, ("region", "period"))
    sub_admin = plan.phi + plan.omega
    col.add("capacity", sub_admin - s.local_capacity, s.local_capacity, ("subregion", "period"))

    sub_total = np.zeros((J, T))
    if K:
        np.add.at(sub_total, scenario.sub_region, sub_admin)
    center_doses = admin - sub_total
    center_cap = np.zeros((J, T))
    if O and T > l0:
        np.add.at(center_cap[:, l0:], scenario.center_region,
                  keep * s.center_capacity[:, l0:] * plan.x[:, : T - l0])
    col.add("linking", np.maximum(-center_doses, center_doses - center_cap), admin, ("region", "period"))
    col.add("supplier bound", plan.g1.sum(axis=1) - s.supplier_capacity, s.supplier_capacity,
            ("supplier", "period"))

    # region hub balance
    arrivals = np.zeros((J, T))
    for i in range(M):
        for j in range(J):
            lag = int(s.lead_1[i, j])
            if lag < T:
                arrivals[j, lag:] += plan.g1[i, j, : T - lag]
    g2_out = np.zeros((J, T))
    if K:
        np.add.at(g2_out, scenario.sub_region, plan.g2)
    center_ship = center_doses / keep
    w1_prev = np.concatenate([np.zeros((J, 1)), plan.w1[:, :-1]], axis=1)
    bal1 = w1_prev + arrivals - g2_out - center_ship - plan.w1
    col.add("region balance", np.abs(bal1), arrivals + w1_prev, ("region", "period"))

    # sub-region hub balance
    if K:
        sub_in = np.zeros((K, T))
        for k in range(K):
            lag = int(s.lead_2[k])
            if lag < T:
                sub_in[k, lag:] = plan.g2[k, : T - lag]
        g3_out = np.zeros((K, T))
        np.add.at(g3_out, scenario.pharm_sub, plan.g3)
        w2_prev = np.concatenate([np.zeros((K, 1)), plan.w2[:, :-1]], axis=1)
        bal2 = w2_prev + sub_in - g3_out - plan.w2
        col.add("subregion balance", np.abs(bal2), sub_in + w2_prev, ("subregion", "period"))
        ph_in = np.zeros((L, T))
        for l in range(L):
            lag = int(s.lead_3[l])
            if lag < T:
                ph_in[l, lag:] = plan.g3[l, : T - lag]
        w3_prev = np.concatenate([np.zeros((L, 1)), plan.w3[:, :-1]], axis=1)
        avail = np.zeros((K, T))
        np.add.at(avail, scenario.pharm_sub, w3_prev + ph_in - plan.w3)
        col.add("pharmacy balance", np.abs(keep * avail - sub_admin), sub_admin, ("subregion", "period"))
    else:
        col.add("subregion balance", np.zeros(1))
        col.add("pharmacy balance", np.zeros(1))

    ledger = compute_cost(scenario, plan)
    col.add("budget", np.array([ledger.total - c.budget]), np.array([c.budget]))
    col.add("equity floor", plan.zeta[None, :] * N[:, None] - admin, N[:, None], ("region", "period"))
    if K:
        floor = plan.nu[scenario.sub_region] * e.pop_sub[:, None]
        col.add("subregion lower bound", floor - sub_admin, floor, ("subregion", "period"))
    else:
        col.add("subregion lower bound", np.zeros(1))
    return col.report()
