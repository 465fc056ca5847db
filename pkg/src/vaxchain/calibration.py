"""Recovering effective infection rates from observed cases and doses.

For every region and period a 3x3 system is solved for the infection rate
and the next susceptible and vaccinated stocks. The system is an exact
rearrangement of the simulator's recursion, so cases produced by
:func:`vaxchain.epidemic.simulate` calibrate back to the generating rates.
"""
from dataclasses import dataclass, field

import numpy as np

from .epidemic import removal_rate

PIVOT_THRESHOLD = 1e-12
DEFAULT_REDUCTION = 0.8


class SingularSystemError(ValueError):
    pass


@dataclass(frozen=True)
class ObservedSeries:
    """Reported cases and administered doses, shape (regions, periods)."""

    regions: tuple
    cases: np.ndarray
    doses: np.ndarray
    pop: np.ndarray
    underreporting_rate: float = 0.0
    gaps: tuple = ()

    def __post_init__(self):
        cases = np.asarray(self.cases, dtype=float)
        doses = np.asarray(self.doses, dtype=float)
        pop = np.asarray(self.pop, dtype=float)
        if cases.shape != doses.shape or cases.ndim != 2:
            raise ValueError(f"cases {cases.shape} and doses {doses.shape} must share a (regions, periods) shape")
        if pop.shape != (cases.shape[0],) or len(self.regions) != cases.shape[0]:
            raise ValueError("one population and one id per region required")
        if np.any(cases < 0) or np.any(doses < 0):
            raise ValueError("cases and doses must be non-negative")
        if np.any(pop <= 0):
            raise ValueError("populations must be positive")
        if not 0.0 <= self.underreporting_rate < 1.0:
            raise ValueError("underreporting rate must lie in [0, 1)")
        object.__setattr__(self, "regions", tuple(self.regions))
        object.__setattr__(self, "cases", cases)
        object.__setattr__(self, "doses", doses)
        object.__setattr__(self, "pop", pop)
        object.__setattr__(self, "gaps", tuple(tuple(g) for g in self.gaps))

    @property
    def horizon(self):
        return self.cases.shape[1]


@dataclass(frozen=True)
class CalibrationIssue:
    region: object
    period: int
    kind: str
    message: str


@dataclass(frozen=True)
class CalibratedRates:
    beta: np.ndarray
    beta_vax: np.ndarray
    r_effective: np.ndarray
    S: np.ndarray
    V: np.ndarray
    I: np.ndarray
    issues: tuple = field(default_factory=tuple)

    @property
    def missing(self):
        return np.isnan(self.beta)

    def errors(self):
        return tuple(i for i in self.issues if i.kind == "singular")


def adjust_underreporting(cases, rate):
    """Scale reported cases up to true infections for a given underreporting fraction."""
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"underreporting rate must lie in [0, 1), got {rate}")
    return np.asarray(cases, dtype=float) / (1.0 - rate) if np.ndim(cases) else cases / (1.0 - rate)


def effective_reproduction(beta, gamma, S, N):
    """beta * gamma * (1 - S/N)."""
    N = np.asarray(N, dtype=float)
    if np.any(N <= 0):
        raise ValueError("population must be positive")
    return np.asarray(beta, dtype=float) * gamma * (1.0 - np.asarray(S, dtype=float) / N)


def solve3(A, b, threshold=PIVOT_THRESHOLD):
    """Gaussian elimination with partial pivoting on a 3x3 system."""
    A = np.array(A, dtype=float)
    b = np.array(b, dtype=float)
    n = 3
    for col in range(n):
        piv = col + int(np.argmax(np.abs(A[col:, col])))
        if abs(A[piv, col]) < threshold:
            raise SingularSystemError(f"pivot {A[piv, col]:.3g} in column {col} below {threshold:g}")
        if piv != col:
            A[[col, piv]] = A[[piv, col]]
            b[[col, piv]] = b[[piv, col]]
        for row in range(col + 1, n):
            f = A[row, col] / A[col, col]
            A[row, col:] -= f * A[col, col:]
            b[row] -= f * b[col]
    x = np.zeros(n)
    for row in range(n - 1, -1, -1):
        x[row] = (b[row] - A[row, row + 1:] @ x[row + 1:]) / A[row, row]
    return x


def rate_system(S, V, I, N, cases, dose_lag, ratio, mu, psi_gamma1):
    """Matrix and right-hand side for one (region, period)."""
    A = np.array([
        [S * I, 1.0, 0.0],
        [S * I + ratio * V * I, 0.0, 0.0],
        [ratio * V * I, 0.0, 1.0],
    ])
    b = np.array([
        (1.0 - mu) * S + mu * N - dose_lag,
        cases,
        (1.0 - mu - psi_gamma1) * V + dose_lag,
    ])
    return A, b


def calibrate_effective_rates(obs, params, reduction=DEFAULT_REDUCTION, interpolate=False):
    """Per-period infection rates recovered from ``obs``.

    ``params`` supplies mu, gamma, gamma1 and psi; its rate arrays are ignored.
    Vaccinated individuals are infected at ``1 - reduction`` times the
    unvaccinated rate. Singular periods get a NaN rate and an issue entry;
    with ``interpolate`` those gaps are filled linearly from neighbours.
    """
    if not 0.0 <= reduction <= 1.0:
        raise ValueError("reduction must lie in [0, 1]")
    ratio = 1.0 - reduction
    J, T = obs.cases.shape
    cases = adjust_underreporting(obs.cases, obs.underreporting_rate)
    mu, lag = params.mu, params.dose_lag
    rem = removal_rate(params.gamma, mu)
    psi_gamma1 = min(params.psi * params.gamma1, 1.0 - mu)
    S = np.zeros((J, T + 1))
    V = np.zeros((J, T + 1))
    I = np.zeros((J, T + 1))
    beta = np.zeros((J, T))
    issues = []
    for j in range(J):
        N = obs.pop[j]
        S[j, 0], I[j, 0] = N - 1.0, 1.0
        for t in range(T):
            dose = obs.doses[j, t - lag] if t >= lag else 0.0
            A, b = rate_system(S[j, t], V[j, t], I[j, t], N, cases[j, t], dose, ratio, mu, psi_gamma1)
            try:
                b_jt, s_next, v_next = solve3(A, b)
            except SingularSystemError as err:
                # with no infectious contact and no cases any rate fits; report zero
                if cases[j, t] == 0:
                    b_jt = 0.0
                else:
                    issues.append(CalibrationIssue(obs.regions[j], t, "singular", str(err)))
                    b_jt = np.nan
                s_next = (1.0 - mu) * S[j, t] + mu * N - dose
                v_next = (1.0 - mu - psi_gamma1) * V[j, t] + dose
            else:
                if b_jt < 0:
                    issues.append(CalibrationIssue(obs.regions[j], t, "negative",
                                                   f"recovered rate {b_jt:.6g} is negative"))
            I[j, t + 1] = (1.0 - mu - rem) * I[j, t] + cases[j, t]
            beta[j, t] = b_jt
            S[j, t + 1], V[j, t + 1] = s_next, v_next
    if interpolate:
        beta = interpolate_gaps(beta)
    r_eff = effective_reproduction(beta, params.gamma, S[:, :T], obs.pop[:, None])
    return CalibratedRates(beta, ratio * beta, r_eff, S, V, I, tuple(issues))


def interpolate_gaps(beta):
    """Fill NaN entries per row by linear interpolation; ends take the nearest value."""
    out = np.array(beta, dtype=float)
    idx = np.arange(out.shape[1])
    for row in out:
        ok = ~np.isnan(row)
        if ok.any() and not ok.all():
            row[~ok] = np.interp(idx[~ok], idx[ok], row[ok])
    return out
