import copy

import numpy as np
import pytest

from vaxchain import formats, synthetic


def base_doc(J=1, K=1, L=1, M=1, T=2, O=1, pop_sub=1000.0, beta=0.0, init_I=10.0, budget=1e9):
    """Hand-sized scenario document; every entity gets the same numbers."""
    regions = [f"r{j}" for j in range(J)]
    suppliers = [f"m{i}" for i in range(M)]
    subs = {r: [f"{r}k{k}" for k in range(K)] for r in regions}
    pharm = {k: [f"{k}p{p}" for p in range(L)] for r in regions for k in subs[r]}
    centers = {r: [f"{r}o{o}" for o in range(O)] for r in regions}
    all_subs = [k for r in regions for k in subs[r]]
    all_ph = [p for k in all_subs for p in pharm[k]]
    all_c = [o for r in regions for o in centers[r]]
    pop = {r: pop_sub * K for r in regions}
    pop.update({k: pop_sub for k in all_subs})
    return {
        "horizon": T,
        "suppliers": suppliers,
        "regions": regions,
        "subregions_of": subs,
        "pharmacies_of": pharm,
        "centers_of": centers,
        "epidemic": {
            "beta": {r: [beta] * T for r in regions},
            "beta_vax": {r: [0.2 * beta] * T for r in regions},
            "pop": pop,
            "init_I": {r: init_I for r in regions},
        },
        "supply": {
            "supplier_capacity": {i: [0.0] * T for i in suppliers},
            "local_capacity": {k: [1e6] * T for k in all_subs},
            "demand": {r: [1e6] * T for r in regions},
            "center_capacity": {o: [1e4] * T for o in all_c},
        },
        "costs": {
            "budget": budget,
            "dose_cost": {i: [10.0] * T for i in suppliers},
            "admin_cost": {r: [0.0] * T for r in regions},
            "open_cost": {o: 0.0 for o in all_c},
            "transport_3": {p: 0.0 for p in all_ph},
        },
        "svi": {k: 0.5 for k in all_subs},
        "access": {r: 0.5 for r in regions},
    }


def build(doc):
    return formats.scenario_from_dict(copy.deepcopy(doc))


@pytest.fixture
def doc():
    return base_doc()


@pytest.fixture(scope="session")
def tiny_suite():
    return [formats.bundled_scenario(f"tiny_{n}") for n in range(1, 6)]


@pytest.fixture(scope="session")
def tiny():
    return formats.bundled_scenario("tiny_1")


@pytest.fixture(scope="session")
def midsize():
    return formats.bundled_scenario("midsize")


def random_small(seed):
    """Seeded random scenario with at most 5 regions and 8 periods."""
    rng = np.random.default_rng(seed)
    sizes = (int(rng.integers(1, 6)), int(rng.integers(1, 4)), int(rng.integers(1, 3)), int(rng.integers(1, 3)),
             int(rng.integers(2, 9)))
    knobs = synthetic.Knobs(
        supply_fraction=float(rng.uniform(0.005, 0.08)),
        budget_fraction=float(rng.uniform(0.05, 1.5)),
        local_capacity_fraction=float(rng.uniform(0.002, 0.03)),
        max_lead=int(rng.integers(0, 3)),
        sigma=float(rng.choice([0.0, 1 / 6])),
        centers_per_region=int(rng.integers(0, 3)),
    )
    return synthetic.generate_synthetic(seed, sizes, knobs)


@pytest.fixture(scope="session")
def tiny_oracle_runs(tiny_suite):
    """(scenario, heuristic plan, oracle result) for every bundled tiny instance."""
    from vaxchain import optimizer, oracle

    runs = []
    for s in tiny_suite:
        plan, _, _ = optimizer.run_knapsack_decomposition(s)
        runs.append((s, plan, oracle.enumerate_optimum(s)))
    return runs


ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[n])
