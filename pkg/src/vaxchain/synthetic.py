"""Seeded synthetic scenarios at desk scale."""
from dataclasses import dataclass, replace

import numpy as np

from .scenario import (CostParams, EpidemicParams, ObjectiveWeights, Scenario, SupplyParams,
                       default_mu)


@dataclass(frozen=True)
class Knobs:
    """Difficulty settings; fractions are per period unless noted."""

    supply_fraction: float = 0.03       # total supplier capacity / total population
    demand_fraction: tuple = (0.6, 0.98)  # horizon-total demand / population
    local_capacity_fraction: float = 0.01
    center_capacity_fraction: float = 0.01
    budget_fraction: float = 0.6        # budget / cost of buying and giving all supply
    contact_band: tuple = (1.1, 1.9)    # beta * N
    infected_band: tuple = (0.002, 0.01)
    removed_band: tuple = (0.02, 0.1)
    sub_pop_band: tuple = (5_000, 50_000)
    sigma: float = 0.0
    t_r: int = 1
    max_lead: int = 1
    centers_per_region: int = 1
    uniform: bool = False


PRESETS = {
    "tiny": ((2, 2, 2, 1, 4), Knobs()),
    # supply, local capacity and demand are of similar size so each can bind
    "midsize": ((6, 4, 2, 2, 8), Knobs(supply_fraction=0.01, demand_fraction=(0.06, 0.12))),
    "national": ((51, 59, 1, 3, 12), Knobs(max_lead=0)),
    "uniform": ((3, 4, 2, 1, 6), Knobs(uniform=True, max_lead=0)),
}


def preset(name, seed=0, **knob_changes):
    try:
        sizes, knobs = PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
    return generate_synthetic(seed, sizes, replace(knobs, **knob_changes))


def generate_synthetic(seed, sizes, knobs=None):
    """Scenario with ``sizes = (regions, subs per region, pharmacies per sub, suppliers, periods)``."""
    knobs = knobs or Knobs()
    J, Kj, Lk, M, T = (int(v) for v in sizes)
    if min(J, Kj, Lk, M, T) < 1:
        raise ValueError(f"all sizes must be at least 1, got {sizes}")
    rng = np.random.default_rng(seed)
    uni = knobs.uniform
    regions = tuple(f"r{j}" for j in range(J))
    suppliers = tuple(f"m{i}" for i in range(M))
    subs_of = {r: tuple(f"{r}k{k}" for k in range(Kj)) for r in regions}
    pharm_of = {k: tuple(f"{k}p{p}" for p in range(Lk)) for r in regions for k in subs_of[r]}
    Oj = knobs.centers_per_region
    centers_of = {r: tuple(f"{r}o{o}" for o in range(Oj)) for r in regions}
    K, L, O = J * Kj, J * Kj * Lk, J * Oj

    lo, hi = knobs.sub_pop_band
    if uni:
        pop_sub = np.repeat(np.round(rng.uniform(lo, hi, size=J)), Kj)
    else:
        pop_sub = np.round(rng.uniform(lo, hi, size=K))
    pop = pop_sub.reshape(J, Kj).sum(axis=1)

    contact = rng.uniform(*knobs.contact_band, size=(J, 1)) * rng.uniform(0.85, 1.15, size=(J, T))
    beta = contact / pop[:, None]
    beta_vax = 0.2 * beta
    init_I = np.round(rng.uniform(*knobs.infected_band, size=J) * pop)
    init_R = np.round(rng.uniform(*knobs.removed_band, size=J) * pop)
    sub_beta0 = np.repeat(beta[:, 0], Kj) * (1.0 if uni else rng.uniform(0.8, 1.2, size=K))
    epi = EpidemicParams(
        beta=beta, beta_vax=beta_vax, pop_region=pop, pop_sub=pop_sub,
        init_I=init_I, init_Itilde=np.zeros(J), init_R=init_R,
        sigma=np.full(T, knobs.sigma), mu=default_mu(), t_r=knobs.t_r,
    )

    total = pop.sum()
    share = rng.dirichlet(np.ones(M))
    supplier_capacity = np.round(knobs.supply_fraction * total * share[:, None] * rng.uniform(0.8, 1.2, size=(M, T)))
    local = np.round(knobs.local_capacity_fraction * pop_sub[:, None] * np.ones((K, T)))
    if not uni:
        local = np.round(local * rng.uniform(0.7, 1.3, size=(K, 1)))
    demand = np.round(rng.uniform(*knobs.demand_fraction, size=(J, 1)) * pop[:, None] / T * np.ones((1, T)))
    center_cap = np.round(knobs.center_capacity_fraction * np.repeat(pop, Oj)[:, None] * np.ones((O, T)))
    ml = knobs.max_lead
    supply = SupplyParams(
        supplier_capacity=supplier_capacity, local_capacity=local, demand=demand,
        center_capacity=center_cap,
        lead_1=rng.integers(0, ml + 1, size=(M, J)),
        lead_2=np.zeros(K, int) if uni else rng.integers(0, ml + 1, size=K),
        lead_3=np.zeros(L, int),
        lead_center=1,
    )

    dose_cost = np.round(rng.uniform(10, 24, size=(M, T)), 2)
    admin = np.round(rng.uniform(15, 30, size=(J, 1)) * np.ones((1, T)), 2)
    unit = dose_cost.mean() + admin.mean() + 3.0
    costs = CostParams(
        budget=float(np.round(knobs.budget_fraction * unit * supplier_capacity.sum())),
        dose_cost=dose_cost, admin_cost=admin,
        transport_1=np.round(rng.uniform(0.5, 2.0, size=(M, J)), 2),
        transport_2=np.full(K, 0.5) if uni else np.round(rng.uniform(0.2, 1.0, size=K), 2),
        transport_3=np.full(L, 0.3) if uni else np.round(rng.uniform(0.1, 0.6, size=L), 2),
        holding_1=np.full(J, 0.1), holding_2=np.full(K, 0.1), holding_3=np.full(L, 0.1),
        open_cost=np.round(rng.uniform(2_000, 8_000, size=O)),
    )
    svi = np.full(K, 0.5) if uni else np.round(rng.uniform(0, 1, size=K), 3)
    access = np.round(rng.uniform(0.3, 0.9, size=J), 3)
    return Scenario(
        horizon=T, suppliers=suppliers, regions=regions, subregions_of=subs_of,
        pharmacies_of=pharm_of, centers_of=centers_of, epidemic=epi, supply=supply,
        costs=costs, weights=ObjectiveWeights(), svi=svi, access=access, sub_beta0=sub_beta0,
    )
