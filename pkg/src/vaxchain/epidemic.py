"""Discrete-time SVIR propagation, reinfection inflow, thresholds and triggers.

All functions are vectorized over regions; regions do not interact.
"""
from dataclasses import dataclass

import numpy as np

from .scenario import EpidemicState, Trajectory

UNDERFLOW_TOL = 1e-9


class StateUnderflowError(ValueError):
    def __init__(self, compartment, value, region=None, period=None):
        where = ""
        if region is not None:
            where += f" in region {region}"
        if period is not None:
            where += f" at period {period}"
        super().__init__(f"state underflow: compartment {compartment} = {value!r}{where}")
        self.compartment = compartment
        self.value = float(value)
        self.region = region
        self.period = period

    @property
    def magnitude(self):
        return abs(self.value)


@dataclass(frozen=True)
class StepInputs:
    state: EpidemicState
    beta: np.ndarray
    beta_vax: np.ndarray
    pop: np.ndarray
    psi_lag: np.ndarray
    xi: np.ndarray
    itilde: np.ndarray
    mu: float
    gamma: float
    gamma1: float = 1.0
    psi_flag: int = 0


def removal_rate(gamma, mu):
    # a removal rate above 1 - mu would push I below zero once recruitment is netted out
    return min(gamma, 1.0 - mu)


def _pre_dose(S, V, I, R, beta, beta_vax, pop, itilde, mu, gamma, gamma1, psi_flag):
    inf_s = beta * S * I
    inf_v = beta_vax * V * I
    rem = removal_rate(gamma, mu) * I
    immune = min(psi_flag * gamma1, 1.0 - mu) * V
    s_pre = S + mu * pop - mu * S - inf_s + itilde
    v_pre = V - mu * V - inf_v - immune
    i_new = I - mu * I + inf_s + inf_v - rem
    r_pre = R - mu * R + immune + rem
    return s_pre, v_pre, i_new, r_pre


def step(inputs, tol=UNDERFLOW_TOL):
    """Advance one period. Raises :class:`StateUnderflowError` on a negative compartment."""
    st = inputs.state
    s_pre, v_pre, i_new, r_pre = _pre_dose(
        np.asarray(st.S, float), np.asarray(st.V, float), np.asarray(st.I, float), np.asarray(st.R, float),
        inputs.beta, inputs.beta_vax, inputs.pop, inputs.itilde,
        inputs.mu, inputs.gamma, inputs.gamma1, inputs.psi_flag)
    S = s_pre - inputs.psi_lag
    V = v_pre + inputs.psi_lag
    R = r_pre - inputs.xi
    scale = tol * np.maximum(1.0, np.asarray(inputs.pop, dtype=float))
    for name, arr in (("S", S), ("V", V), ("I", i_new), ("R", R)):
        arr = np.atleast_1d(arr)
        bad = arr < -np.broadcast_to(scale, arr.shape)
        if np.any(bad):
            j = int(np.argmax(bad))
            raise StateUnderflowError(name, arr[j], region=j)
    return EpidemicState(S, V, i_new, R, np.asarray(inputs.itilde, dtype=float))


def threshold(flux, t, beta_t, S0, I0):
    """Infection threshold at period t from the flux history (regions x periods)."""
    if t >= 3:
        return flux[:, t - 3:t].mean(axis=1)
    return 0.5 * beta_t * S0 * I0


@dataclass(frozen=True)
class RawRun:
    S: np.ndarray
    V: np.ndarray
    I: np.ndarray
    R: np.ndarray
    Itilde: np.ndarray
    flux: np.ndarray
    tau: np.ndarray
    s_avail: np.ndarray
    r_avail: np.ndarray


def run(scenario, psi, xi, check=True, tol=UNDERFLOW_TOL):
    """Simulate the horizon for dose arrays ``psi`` and ``xi`` (regions x periods).

    Besides the trajectory this records, per period, the susceptible and
    removed stock available to doses before they are subtracted.
    """
    e = scenario.epidemic
    J, T = scenario.n_regions, scenario.horizon
    N = e.pop_region
    lag = e.dose_lag
    S = np.zeros((J, T + 1))
    V = np.zeros((J, T + 1))
    I = np.zeros((J, T + 1))
    R = np.zeros((J, T + 1))
    Itil = np.zeros((J, T + 1))
    flux = np.zeros((J, T))
    tau = np.zeros((J, T))
    s_avail = np.zeros((J, T))
    r_avail = np.zeros((J, T))
    S[:, 0] = N - e.init_I + e.init_Itilde
    I[:, 0] = e.init_I
    R[:, 0] = e.init_R
    scale = tol * np.maximum(1.0, N)
    for t in range(T):
        b, bv = e.beta[:, t], e.beta_vax[:, t]
        flux[:, t] = (b * S[:, t] + bv * V[:, t]) * I[:, t]
        tau[:, t] = threshold(flux, t, b, S[:, 0], I[:, 0])
        inflow = e.sigma[t] * flux[:, t - e.t_r] if t >= e.t_r else np.zeros(J)
        Itil[:, t] = inflow
        s_pre, v_pre, i_new, r_pre = _pre_dose(S[:, t], V[:, t], I[:, t], R[:, t], b, bv, N, inflow,
                                               e.mu, e.gamma, e.gamma1, e.psi)
        s_avail[:, t] = s_pre
        r_avail[:, t] = r_pre
        dose = psi[:, t - lag] if t >= lag else 0.0
        S[:, t + 1] = s_pre - dose
        V[:, t + 1] = v_pre + dose
        I[:, t + 1] = i_new
        R[:, t + 1] = r_pre - xi[:, t]
        if check:
            for name, arr in (("S", S), ("V", V), ("I", I), ("R", R)):
                bad = arr[:, t + 1] < -scale
                if np.any(bad):
                    j = int(np.argmax(bad))
                    raise StateUnderflowError(name, arr[j, t + 1], scenario.regions[j], t + 1)
    return RawRun(S, V, I, R, Itil, flux, tau, s_avail, r_avail)


def simulate(scenario, plan):
    """Trajectory of the SVIR recursion under ``plan``'s regional doses."""
    r = run(scenario, np.asarray(plan.psi), np.asarray(plan.xi))
    return Trajectory(r.S, r.V, r.I, r.R, r.Itilde, r.flux, r.tau)


def reinfection_inflow(trajectory, j, t, sigma, t_r):
    """Persons re-entering the susceptible pool in region ``j`` at period ``t``."""
    if t < t_r:
        return 0.0
    s = sigma[t] if np.ndim(sigma) else sigma
    return float(s * trajectory.new_infections[j, t - t_r])


def infection_threshold(trajectory, j, t, beta_jt=None):
    """Threshold for region ``j`` at ``t``: the three-period flux mean, or half the seed flux."""
    if t >= 3:
        return float(trajectory.new_infections[j, t - 3:t].mean())
    if beta_jt is None:
        return float(trajectory.tau[j, t])
    return float(0.5 * beta_jt * trajectory.S[j, 0] * trajectory.I[j, 0])


def all_trigger_indicators(trajectory, scenario):
    """Infection and demand triggers for every (region, period)."""
    T = scenario.horizon
    ui = (trajectory.new_infections > trajectory.tau).astype(float)
    cap = np.zeros((scenario.n_regions, T))
    if scenario.n_subregions:
        np.add.at(cap, scenario.sub_region, scenario.supply.local_capacity)
    ud = (cap < scenario.supply.demand).astype(float)
    l0 = min(int(scenario.supply.lead_center), T)
    ui[:, :l0] = 0.0
    ud[:, :l0] = 0.0
    return ui, ud


def trigger_indicators(trajectory, scenario, j, t):
    """(infection trigger, demand trigger) for region ``j`` at period ``t``."""
    if t < scenario.supply.lead_center:
        return 0, 0
    flux = trajectory.new_infections[j, t]
    ui = int(flux > trajectory.tau[j, t])
    cap = float(np.sum(scenario.supply.local_capacity[scenario.sub_region == j, t]))
    ud = int(cap < scenario.supply.demand[j, t])
    return ui, ud
