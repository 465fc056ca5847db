"""Dense bounded-variable primal simplex and a greedy knapsack fast path.

The simplex works on a full tableau. Variables carry finite lower bounds and
possibly infinite upper bounds; nonbasic variables sit at either bound. Phase 1
drives artificial variables to zero, phase 2 maximizes the user objective.
Dantzig pricing is used until a run of degenerate pivots exhausts the
degeneracy budget, after which Bland's rule takes over.
"""
from dataclasses import dataclass, field

import numpy as np

PIVOT_TOL = 1e-9
FEAS_TOL = 1e-8

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"

_SENSES = ("<=", "=", ">=")


class InfeasibleError(ValueError):
    """Raised when a greedy allocation instance has no feasible point."""


class CrossCheckError(AssertionError):
    """Raised when the greedy and simplex routes disagree."""

    def __init__(self, report):
        super().__init__(
            f"greedy objective {report.greedy_objective!r} != "
            f"simplex objective {report.lp_objective!r} "
            f"(relative difference {report.relative_difference:.3e})"
        )
        self.report = report


@dataclass(frozen=True)
class LinearProgram:
    """maximize c.x subject to rows A x (sense) b and lo <= x <= hi."""

    c: np.ndarray
    A: np.ndarray
    senses: tuple
    b: np.ndarray
    lo: np.ndarray = None
    hi: np.ndarray = None

    def __post_init__(self):
        c = np.asarray(self.c, dtype=float).ravel()
        n = c.size
        A = np.asarray(self.A, dtype=float)
        if A.size == 0:
            A = A.reshape(0, n)
        if A.ndim != 2 or A.shape[1] != n:
            raise ValueError(f"constraint matrix shape {A.shape} does not match {n} variables")
        m = A.shape[0]
        b = np.asarray(self.b, dtype=float).ravel()
        if b.size != m:
            raise ValueError(f"right-hand side has {b.size} entries, expected {m}")
        senses = tuple(self.senses)
        if len(senses) != m:
            raise ValueError(f"{len(senses)} senses given for {m} rows")
        bad = [s for s in senses if s not in _SENSES]
        if bad:
            raise ValueError(f"unknown constraint sense {bad[0]!r}")
        lo = np.zeros(n) if self.lo is None else np.asarray(self.lo, dtype=float).ravel()
        hi = np.full(n, np.inf) if self.hi is None else np.asarray(self.hi, dtype=float).ravel()
        if lo.size != n or hi.size != n:
            raise ValueError("bound vectors must match the number of variables")
        if not np.all(np.isfinite(lo)):
            raise ValueError("lower bounds must be finite")
        if np.any(lo > hi):
            j = int(np.argmax(lo > hi))
            raise ValueError(f"variable {j} has lower bound above upper bound")
        if not np.all(np.isfinite(b)) or not np.all(np.isfinite(c)) or not np.all(np.isfinite(A)):
            raise ValueError("objective, matrix and right-hand side must be finite")
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "senses", senses)
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def n_vars(self):
        return self.c.size

    @property
    def n_rows(self):
        return self.b.size


@dataclass(frozen=True)
class LpSolution:
    status: str
    x: np.ndarray = None
    objective: float = float("nan")
    iterations: int = 0
    reduced_costs: np.ndarray = field(default=None, repr=False)


class _Tableau:
    def __init__(self, T, beta, basis, upper, pivot_tol, degeneracy_budget):
        self.T = T
        self.beta = beta
        self.basis = basis
        self.upper = upper
        self.at_upper = np.zeros(T.shape[1], dtype=bool)
        self.is_basic = np.zeros(T.shape[1], dtype=bool)
        self.is_basic[basis] = True
        self.pivot_tol = pivot_tol
        self.degeneracy_budget = degeneracy_budget
        self.iterations = 0

    def reduced_costs(self, cost):
        return cost - cost[self.basis] @ self.T

    def pivot(self, r, q):
        T = self.T
        prow = T[r] / T[r, q]
        T -= np.outer(T[:, q], prow)
        T[r] = prow
        self.is_basic[self.basis[r]] = False
        self.basis[r] = q
        self.is_basic[q] = True

    def run(self, cost, opt_tol, max_iter):
        degenerate = 0
        upper = self.upper
        while True:
            if self.iterations >= max_iter:
                raise RuntimeError(f"simplex iteration limit {max_iter} reached")
            d = self.reduced_costs(cost)
            movable = ~self.is_basic & (upper > 0)
            eligible = movable & ((~self.at_upper & (d > opt_tol)) | (self.at_upper & (d < -opt_tol)))
            idx = np.flatnonzero(eligible)
            if idx.size == 0:
                return OPTIMAL
            bland = degenerate >= self.degeneracy_budget
            q = int(idx[0]) if bland else int(idx[np.argmax(np.abs(d[idx]))])
            sigma = -1.0 if self.at_upper[q] else 1.0
            rate = -sigma * self.T[:, q]
            ub = upper[self.basis]
            theta = np.full(rate.size, np.inf)
            dec = rate < -self.pivot_tol
            theta[dec] = np.maximum(self.beta[dec], 0.0) / -rate[dec]
            inc = (rate > self.pivot_tol) & np.isfinite(ub)
            theta[inc] = np.maximum(ub[inc] - self.beta[inc], 0.0) / rate[inc]
            row_theta = theta.min() if theta.size else np.inf
            flip_theta = upper[q]
            step = min(row_theta, flip_theta)
            if not np.isfinite(step):
                return UNBOUNDED
            self.iterations += 1
            degenerate = degenerate + 1 if step <= 1e-12 else 0
            if flip_theta <= row_theta:
                self.beta += rate * step
                self.at_upper[q] = not self.at_upper[q]
                continue
            ties = np.flatnonzero(theta <= row_theta + 1e-12)
            if bland:
                r = int(ties[np.argmin(self.basis[ties])])
            else:
                r = int(ties[np.argmax(np.abs(rate[ties]))])
            leaving = self.basis[r]
            to_upper = rate[r] > 0
            self.beta += rate * step
            self.beta[r] = step if sigma > 0 else upper[q] - step
            self.pivot(r, q)
            self.at_upper[leaving] = bool(to_upper)
            self.at_upper[q] = False


def solve_lp(lp, pivot_tol=PIVOT_TOL, feas_tol=FEAS_TOL, degeneracy_budget=50, max_iter=None):
    """Solve ``lp`` and return an :class:`LpSolution`.

    Infeasible and unbounded problems are reported through ``status``.
    """
    n, m = lp.n_vars, lp.n_rows
    lo = lp.lo
    span = lp.hi - lo
    A = lp.A.copy()
    b = lp.b - A @ lo
    sign = np.array([-1.0 if s == ">=" else 1.0 for s in lp.senses])
    A *= sign[:, None]
    b *= sign
    is_eq = np.array([s == "=" for s in lp.senses], dtype=bool)

    flip = b < 0
    row_sign = np.where(flip, -1.0, 1.0)
    A *= row_sign[:, None]
    b = b * row_sign
    slack = np.diag(row_sign)
    slack_ub = np.where(is_eq, 0.0, np.inf)

    # rows whose slack can start basic need no artificial
    needs_art = is_eq | flip
    art_rows = np.flatnonzero(needs_art)
    n_art = art_rows.size
    art = np.zeros((m, n_art))
    art[art_rows, np.arange(n_art)] = 1.0
    full = np.hstack([A, slack, art])
    upper = np.concatenate([span, slack_ub, np.full(n_art, np.inf)])
    n_total = full.shape[1]

    basis = np.empty(m, dtype=int)
    basis[~needs_art] = n + np.flatnonzero(~needs_art)
    basis[art_rows] = n + m + np.arange(n_art)
    tab = _Tableau(full.copy(), b.copy(), basis, upper, pivot_tol, degeneracy_budget)
    if max_iter is None:
        max_iter = 50 * (m + n_total) + 1000
    scale = max(1.0, float(np.abs(b).max()) if m else 1.0)

    if n_art:
        cost1 = np.zeros(n_total)
        cost1[n + m:] = -1.0
        tab.run(cost1, feas_tol, max_iter)
        art_total = float(tab.beta[tab.basis >= n + m].sum())
        if art_total > feas_tol * scale:
            return LpSolution(INFEASIBLE, iterations=tab.iterations)
        for r in np.flatnonzero(tab.basis >= n + m):
            row = np.abs(tab.T[r, : n + m])
            row[tab.is_basic[: n + m]] = 0.0
            q = int(np.argmax(row)) if row.size else -1
            if q >= 0 and row[q] > pivot_tol:
                value = upper[q] if tab.at_upper[q] else 0.0
                tab.pivot(r, q)
                tab.beta[r] = value
                tab.at_upper[q] = False
        tab.upper[n + m:] = 0.0
        tab.at_upper[n + m:] = False

    cost2 = np.zeros(n_total)
    cost2[:n] = lp.c
    scale_c = max(1.0, float(np.abs(lp.c).max()) if n else 1.0)
    status = tab.run(cost2, feas_tol * scale_c, max_iter)
    if status == UNBOUNDED:
        return LpSolution(UNBOUNDED, iterations=tab.iterations)

    values = np.where(tab.at_upper, upper, 0.0)
    values[tab.basis] = 0.0
    rhs = b - full @ values
    try:
        xb = np.linalg.solve(full[:, tab.basis], rhs)
    except np.linalg.LinAlgError:
        xb = tab.beta
    if not np.all(np.isfinite(xb)):
        xb = tab.beta
    values[tab.basis] = xb
    x = lo + values[:n]
    x = np.clip(x, lo, lp.hi)
    d = tab.reduced_costs(cost2)[:n]
    d[tab.is_basic[:n]] = 0.0
    return LpSolution(OPTIMAL, x, float(lp.c @ x), tab.iterations, d)


def solve_greedy_knapsack(weights, lower, upper, total, tol=1e-9):
    """Fill ``total`` units: lower bounds first, then by descending weight.

    Ties go to the lower item index. Raises :class:`InfeasibleError` when
    ``total`` lies outside ``[sum(lower), sum(upper)]``.
    """
    w = np.asarray(weights, dtype=float).ravel()
    lo = np.asarray(lower, dtype=float).ravel()
    hi = np.asarray(upper, dtype=float).ravel()
    if not (w.size == lo.size == hi.size):
        raise ValueError("weights and bounds must have equal length")
    if np.any(lo < 0) or np.any(hi < lo):
        raise ValueError("bounds must satisfy 0 <= lower <= upper")
    lo_sum, hi_sum = float(lo.sum()), float(hi.sum())
    slack = tol * max(1.0, abs(float(total)))
    if total < lo_sum - slack or total > hi_sum + slack:
        raise InfeasibleError(f"total {total!r} outside [{lo_sum!r}, {hi_sum!r}]")
    x = lo.copy()
    remaining = max(float(total) - lo_sum, 0.0)
    order = np.lexsort((np.arange(w.size), -w))
    room = (hi - lo)[order]
    before = np.concatenate([[0.0], np.cumsum(room)[:-1]])
    x[order] += np.clip(remaining - before, 0.0, room)
    return x


def knapsack_lp(weights, lower, upper, total):
    """The greedy instance written as an explicit linear program."""
    w = np.asarray(weights, dtype=float).ravel()
    return LinearProgram(c=w, A=np.ones((1, w.size)), senses=("=",), b=[float(total)],
                         lo=np.asarray(lower, dtype=float), hi=np.asarray(upper, dtype=float))


@dataclass(frozen=True)
class CrossCheckReport:
    agree: bool
    greedy_objective: float
    lp_objective: float
    relative_difference: float
    greedy_x: np.ndarray = field(repr=False)
    lp_x: np.ndarray = field(repr=False)


def cross_check(weights, lower, upper, total, rel_tol=1e-9, raise_on_mismatch=False):
    """Solve one knapsack instance by greedy and by simplex and compare objectives."""
    w = np.asarray(weights, dtype=float).ravel()
    gx = solve_greedy_knapsack(w, lower, upper, total)
    sol = solve_lp(knapsack_lp(w, lower, upper, total))
    if sol.status != OPTIMAL:
        raise CrossCheckError(CrossCheckReport(False, float(w @ gx), float("nan"), float("inf"), gx, None))
    g_obj = float(w @ gx)
    l_obj = sol.objective
    rel = abs(g_obj - l_obj) / max(1.0, abs(g_obj), abs(l_obj))
    report = CrossCheckReport(rel <= rel_tol, g_obj, l_obj, rel, gx, sol.x)
    if raise_on_mismatch and not report.agree:
        raise CrossCheckError(report)
    return report
