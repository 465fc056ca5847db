"""Gini coefficient, knapsack priority weights and plan-level equity figures."""
from dataclasses import dataclass

import numpy as np

SVI_CUTS = (0.25, 0.5, 0.75)


def gini_coefficient(u):
    """Mean absolute pairwise difference over twice the mean: sum|u_m-u_n| / (2 mean n^2).

    An all-zero vector has coefficient 0.
    """
    u = np.asarray(u, dtype=float).ravel()
    if u.size == 0:
        raise ValueError("gini_coefficient needs at least one value")
    if np.any(u < 0):
        raise ValueError("gini_coefficient is defined for non-negative values only")
    n = u.size
    mean = u.mean()
    if mean == 0:
        return 0.0
    s = np.sort(u)
    pair_sum = 2.0 * np.sum((2.0 * np.arange(n) - n + 1.0) * s)
    return float(pair_sum / (2.0 * mean * n * n))


def pairwise_differences(u):
    u = np.asarray(u, dtype=float).ravel()
    return np.abs(u[:, None] - u[None, :])


def svi_bins(svi, cuts=SVI_CUTS):
    """Discretize SVI scores into bins 1..len(cuts)+1 (upper edges inclusive)."""
    return np.searchsorted(np.asarray(cuts), np.asarray(svi, dtype=float), side="left") + 1


def _group_max(values, groups, n_groups):
    out = np.full(n_groups, -np.inf)
    np.maximum.at(out, groups, values)
    return out


def _ratio_to_group_max(values, groups, n_groups):
    gmax = _group_max(values, groups, n_groups)[groups]
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(gmax > 0, values / np.where(gmax > 0, gmax, 1.0), 0.0)


@dataclass(frozen=True)
class PriorityComponents:
    d_svi: np.ndarray
    d_beta: np.ndarray
    d_pop: np.ndarray
    groups: np.ndarray
    n_groups: int


def county_priority_components(svi, beta0, pop, groups, n_groups=None):
    """Max-normalized SVI bin, initial infection rate and population per county."""
    groups = np.asarray(groups, dtype=int).ravel()
    if n_groups is None:
        n_groups = int(groups.max()) + 1 if groups.size else 0
    counts = np.bincount(groups, minlength=n_groups) if groups.size else np.zeros(n_groups, int)
    if n_groups == 0 or np.any(counts == 0):
        empty = int(np.argmin(counts)) if n_groups else 0
        raise ValueError(f"region {empty} has no sub-regions")
    bins = svi_bins(svi).astype(float)
    return PriorityComponents(
        d_svi=_ratio_to_group_max(bins, groups, n_groups),
        d_beta=_ratio_to_group_max(np.asarray(beta0, dtype=float), groups, n_groups),
        d_pop=_ratio_to_group_max(np.asarray(pop, dtype=float), groups, n_groups),
        groups=groups,
        n_groups=n_groups,
    )


@dataclass(frozen=True)
class KnapsackWeights:
    d_svi: np.ndarray
    d_beta: np.ndarray
    d_pop: np.ndarray
    d: np.ndarray
    rho: np.ndarray
    delta: np.ndarray


def priority_weights(components, access):
    """Composite score, within-region shares and access-scaled priority weights."""
    c = components
    access = np.asarray(access, dtype=float).ravel()
    if np.any((access < 0) | (access > 1)):
        raise ValueError("access scores must lie in [0, 1]")
    d = np.sqrt(c.d_svi ** 2 + c.d_beta ** 2 + c.d_pop ** 2)
    totals = np.bincount(c.groups, weights=d, minlength=c.n_groups)
    if np.any(totals <= 0):
        raise ValueError(f"region {int(np.argmin(totals))} has zero total priority score")
    rho = d / totals[c.groups]
    delta = (1.0 - access[c.groups]) * rho
    return KnapsackWeights(c.d_svi, c.d_beta, c.d_pop, d, rho, delta)


def scenario_priority_weights(scenario):
    comp = county_priority_components(scenario.svi, scenario.sub_beta0, scenario.epidemic.pop_sub,
                                      scenario.sub_region, scenario.n_regions)
    return priority_weights(comp, scenario.access)


@dataclass(frozen=True)
class GiniReport:
    u: np.ndarray
    region_mean: np.ndarray
    gini: np.ndarray
    eta: float
    zeta: np.ndarray

    def pairwise(self, groups, j):
        return pairwise_differences(self.u[np.asarray(groups) == j])


def plan_equity_report(scenario, plan):
    """Per-capita coverage by sub-region, regional Gini values and the per-period floor."""
    pop_sub = scenario.epidemic.pop_sub
    if np.any(pop_sub <= 0):
        raise ValueError("sub-region populations must be positive")
    u = (plan.phi + plan.omega).sum(axis=1) / pop_sub
    J = scenario.n_regions
    groups = scenario.sub_region
    means = np.zeros(J)
    ginis = np.zeros(J)
    for j in range(J):
        uj = u[groups == j]
        if uj.size:
            means[j] = uj.mean()
            ginis[j] = gini_coefficient(np.maximum(uj, 0.0))
    per_capita = (plan.psi + plan.xi) / scenario.epidemic.pop_region[:, None]
    zeta = per_capita.min(axis=0) if J else np.zeros(scenario.horizon)
    return GiniReport(u, means, ginis, float(ginis.max(initial=0.0)), zeta)
