"""Paired t-tests, one-at-a-time sensitivity runs and report bundles."""
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import formats
from .equity import plan_equity_report
from .optimizer import optimality_gap, run_knapsack_decomposition
from .scenario import compute_cost, evaluate_objectives, opening_events

BETA_EPS = 1e-16
BETA_MAX_ITER = 1000

PARAMETERS = ("budget", "supply", "infection_rate", "vaccine_effectiveness", "capacity", "demand")
ENCODINGS = ("ratio", "effectiveness", "table")
DEFAULT_MULTIPLIERS = (0.8, 1.0, 1.2)


# t-test

@dataclass(frozen=True)
class TTestResult:
    t: float
    df: int
    p: float
    degenerate: bool = False


def _beta_fraction(a, b, x):
    """Continued fraction for the incomplete beta function (modified Lentz)."""
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    d = 1.0 / (d if abs(d) > tiny else tiny)
    h = d
    for m in range(1, BETA_MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        d = 1.0 / (d if abs(d) > tiny else tiny)
        c = 1.0 + aa / c
        c = c if abs(c) > tiny else tiny
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        d = 1.0 / (d if abs(d) > tiny else tiny)
        c = 1.0 + aa / c
        c = c if abs(c) > tiny else tiny
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < BETA_EPS:
            return h
    raise ArithmeticError(f"incomplete beta did not converge for a={a}, b={b}, x={x}")


def regularized_incomplete_beta(a, b, x):
    """I_x(a, b) for a, b > 0 and x in [0, 1]."""
    if a <= 0 or b <= 0:
        raise ValueError("shape parameters must be positive")
    if not 0.0 <= x <= 1.0:
        raise ValueError("x must lie in [0, 1]")
    return _ibeta(a, b, x, 1.0 - x)


def _ibeta(a, b, x, y):
    # y = 1 - x, passed separately so callers can supply it without cancellation
    if x == 0.0 or y == 0.0:
        return 0.0 if x == 0.0 else 1.0
    log_front = (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
                 + a * math.log(x) + b * math.log(y))
    front = math.exp(log_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _beta_fraction(a, b, x) / a
    return 1.0 - front * _beta_fraction(b, a, y) / b


def t_two_sided_p(t, df):
    if math.isinf(t):
        return 0.0
    t2 = t * t
    return min(1.0, _ibeta(df / 2.0, 0.5, df / (df + t2), t2 / (df + t2)))


def paired_t_test(a, b):
    """Two-tailed paired t-test on ``a - b``.

    Differences with zero spread give t = 0, p = 1 when their mean is zero and
    an infinite t with p = 0 (flagged degenerate) otherwise.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("paired series must be one-dimensional and of equal length")
    n = a.size
    if n < 2:
        raise ValueError("paired t-test needs at least two pairs")
    d = a - b
    mean = math.fsum(d) / n
    sd = math.sqrt(math.fsum((d - mean) ** 2) / (n - 1))
    df = n - 1
    if sd == 0.0:
        if mean == 0.0:
            return TTestResult(0.0, df, 1.0)
        return TTestResult(math.copysign(math.inf, mean), df, 0.0, degenerate=True)
    t = mean / (sd / math.sqrt(n))
    return TTestResult(t, df, t_two_sided_p(t, df))


# sensitivity

@dataclass(frozen=True)
class SensitivityRow:
    parameter: str
    multiplier: float
    infections: float
    vaccinations: float
    centers_opened: int
    infections_change: float
    vaccinations_change: float
    failed: bool = False
    error: str = ""


@dataclass(frozen=True)
class RunSummary:
    infections: float
    vaccinations: float
    centers_opened: int


def perturb(scenario, parameter, multiplier, encoding="ratio"):
    """Copy of ``scenario`` with one parameter scaled by ``multiplier``.

    ``vaccine_effectiveness`` with the ``ratio`` encoding scales the
    vaccinated-to-unvaccinated infection-rate ratio (below 1 means a more
    effective vaccine); the ``effectiveness`` encoding scales one minus that
    ratio. ``table`` sets the ratio to the multiplier times the protected
    fraction, so 0.8 turns a 0.2 ratio into 0.64; a unit multiplier still
    returns the unperturbed scenario. All are capped so the vaccinated rate
    never exceeds the base rate.
    """
    if parameter not in PARAMETERS:
        raise ValueError(f"unknown parameter {parameter!r}; expected one of {', '.join(PARAMETERS)}")
    if not multiplier > 0:
        raise ValueError("multipliers must be positive")
    if encoding not in ENCODINGS:
        raise ValueError(f"unknown effectiveness encoding {encoding!r}")
    m = float(multiplier)
    if m == 1.0:
        return scenario
    e, s, c = scenario.epidemic, scenario.supply, scenario.costs
    if parameter == "budget":
        return scenario.replace(costs=replace(c, budget=c.budget * m))
    if parameter == "supply":
        return scenario.replace(supply=replace(s, supplier_capacity=s.supplier_capacity * m))
    if parameter == "capacity":
        return scenario.replace(supply=replace(s, local_capacity=s.local_capacity * m,
                                               center_capacity=s.center_capacity * m))
    if parameter == "demand":
        return scenario.replace(supply=replace(s, demand=s.demand * m))
    if parameter == "infection_rate":
        return scenario.replace(epidemic=replace(e, beta=e.beta * m, beta_vax=e.beta_vax * m),
                                sub_beta0=scenario.sub_beta0 * m)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(e.beta > 0, e.beta_vax / e.beta, 0.0)
    if encoding == "ratio":
        new_ratio = np.minimum(ratio * m, 1.0)
    elif encoding == "effectiveness":
        new_ratio = 1.0 - np.minimum((1.0 - ratio) * m, 1.0)
    else:
        new_ratio = np.minimum((1.0 - ratio) * m, 1.0)
    return scenario.replace(epidemic=replace(e, beta_vax=new_ratio * e.beta))


def summarize_run(scenario, plan, trajectory):
    return RunSummary(float(trajectory.new_infections.sum()), float(plan.regional_doses.sum()),
                      int(round(opening_events(plan.x).sum())))


def _run_one(args):
    scenario, parameter, m, encoding = args
    try:
        s = perturb(scenario, parameter, m, encoding)
        plan, traj, _ = run_knapsack_decomposition(s, cross_check=False)
        return summarize_run(s, plan, traj), ""
    except (ArithmeticError, ValueError, RuntimeError) as err:
        return None, f"{type(err).__name__}: {err}"


def _pct(value, ref):
    if ref == 0:
        return 0.0 if value == 0 else math.copysign(math.inf, value)
    return (value - ref) / ref * 100.0


@dataclass(frozen=True)
class SensitivityTable:
    parameter: str
    encoding: str
    baseline: RunSummary
    reference_infections: float
    rows: tuple

    def row(self, multiplier):
        for r in self.rows:
            if r.multiplier == multiplier:
                return r
        raise KeyError(multiplier)


def run_sensitivity(scenario, parameter, multipliers=DEFAULT_MULTIPLIERS, encoding="ratio",
                    reference_infections=None, workers=1):
    """Re-run the knapsack decomposition once per multiplier of one parameter.

    Infection changes are measured against ``reference_infections`` when
    given (for example an observed case total) and against the unperturbed
    run otherwise; vaccination changes are always against the unperturbed run.
    Rows whose run fails are flagged and the sweep continues.
    """
    if parameter not in PARAMETERS:
        raise ValueError(f"unknown parameter {parameter!r}; expected one of {', '.join(PARAMETERS)}")
    mults = [float(m) for m in multipliers]
    if not mults or any(not m > 0 for m in mults):
        raise ValueError("multipliers must be positive")
    todo = sorted(set(mults) | {1.0})
    jobs = [(scenario, parameter, m, encoding) for m in todo]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = dict(zip(todo, pool.map(_run_one, jobs)))
    else:
        results = {m: _run_one(job) for m, job in zip(todo, jobs)}
    baseline, err = results[1.0]
    if baseline is None:
        raise RuntimeError(f"baseline run failed: {err}")
    ref = baseline.infections if reference_infections is None else float(reference_infections)
    rows = []
    for m in mults:
        summary, err = results[m]
        if summary is None:
            rows.append(SensitivityRow(parameter, m, math.nan, math.nan, 0, math.nan, math.nan, True, err))
            continue
        rows.append(SensitivityRow(parameter, m, summary.infections, summary.vaccinations, summary.centers_opened,
                                   _pct(summary.infections, ref), _pct(summary.vaccinations, baseline.vaccinations)))
    return SensitivityTable(parameter, encoding, baseline, ref, tuple(rows))


SENSITIVITY_HEADER = ("Parameter", "Multiplier", "Infections", "Infections Change (%)", "Vaccinations",
                      "Vaccinations Change (%)", "Centers Opened", "Status")


def write_sensitivity(path, tables):
    rows = []
    for table in tables:
        for r in table.rows:
            rows.append((r.parameter, r.multiplier, r.infections, r.infections_change, r.vaccinations,
                         r.vaccinations_change, r.centers_opened, r.error or ("failed" if r.failed else "ok")))
    formats.write_table(path, SENSITIVITY_HEADER, rows)


# report bundle

@dataclass(frozen=True)
class ReportBundle:
    directory: Path
    files: tuple


def _kv(lines, key, value):
    if isinstance(value, (list, tuple, np.ndarray)):
        value = " ".join(formats.fmt(v) for v in value)
    else:
        value = formats.fmt(value)
    lines.append(f"{key}: {value}")


def _write_text(path, lines):
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _write_diagnostics(path, diag):
    lines = []
    _kv(lines, "variant", diag.variant)
    _kv(lines, "termination", diag.termination)
    _kv(lines, "accepted_periods", diag.accepted_periods)
    _kv(lines, "alpha_history", list(diag.alpha_history))
    _kv(lines, "backtracks", list(diag.backtracks))
    _kv(lines, "cost_increments", diag.increments)
    _kv(lines, "cumulative_cost", diag.cumulative)
    _kv(lines, "total_cost", diag.total_cost)
    _kv(lines, "budget", diag.budget)
    _kv(lines, "cross_checks", diag.cross_checks)
    _kv(lines, "worst_cross_check", diag.worst_cross_check)
    if diag.gini_residual is not None:
        _kv(lines, "gini_residual_doses", diag.gini_residual)
    for n, dec in enumerate(diag.tail):
        _kv(lines, f"tail_period_{dec.t}_doses", dec.totals)
    for note in diag.notes:
        lines.append(f"note: {note}")
    _write_text(path, lines)


def assemble_report(out_dir, scenario, plan, trajectory, diagnostics=None, oracle=None,
                    reference_cases=None, sensitivity=None, method=None):
    """Write the report bundle for one run into ``out_dir``.

    ``oracle`` is an optional :class:`~vaxchain.oracle.OracleComparison`;
    ``sensitivity`` an optional sequence of sensitivity tables. Sections whose
    input is absent are left out. Returns the bundle with its file names.
    """
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as err:
        raise OSError(f"cannot create report directory {out}: {err.strerror}") from err
    written = []

    def target(name):
        written.append(name)
        return out / name

    try:
        formats.write_plan(target("plan.tsv"), scenario, plan)
        formats.write_trajectory(target("trajectory.tsv"), scenario, trajectory)
        ledger = compute_cost(scenario, plan)
        formats.write_ledger(target("ledger.tsv"), ledger)
        eq = plan_equity_report(scenario, plan)
        formats.write_table(target("equity.tsv"), ("region_id", "gini", "mean_coverage"),
                            [(r, eq.gini[j], eq.region_mean[j]) for j, r in enumerate(scenario.regions)])
        if diagnostics is not None:
            _write_diagnostics(target("diagnostics.txt"), diagnostics)
        T = scenario.horizon
        regions = list(scenario.regions)
        flux = trajectory.new_infections
        formats.write_table(target("series_infections.tsv"), ["period"] + regions + ["total"],
                            [[t] + list(flux[:, t]) + [flux[:, t].sum()] for t in range(T)])
        doses = plan.regional_doses
        formats.write_table(target("series_doses.tsv"), ["period"] + regions + ["total"],
                            [[t] + list(doses[:, t]) + [doses[:, t].sum()] for t in range(T)])
        per, cum = ledger.per_period, ledger.cumulative
        formats.write_table(target("series_cost.tsv"), ("period", "cost", "cumulative", "budget"),
                            [(t, per[t], cum[t], ledger.budget) for t in range(T)])
        formats.write_table(target("series_zeta.tsv"), ("period", "zeta"), [(t, eq.zeta[t]) for t in range(T)])
        if sensitivity:
            write_sensitivity(target("sensitivity.tsv"), sensitivity)

        lines = []
        if method:
            _kv(lines, "method", method)
        knap = evaluate_objectives(scenario, plan, trajectory, "knapsack")
        gini = evaluate_objectives(scenario, plan, trajectory, "gini")
        _kv(lines, "infections", knap.infection_flux_total)
        _kv(lines, "vaccinations", float(doses.sum()))
        _kv(lines, "centers_opened", int(round(opening_events(plan.x).sum())))
        _kv(lines, "objective_knapsack", knap.scalarized)
        _kv(lines, "objective_gini", gini.scalarized)
        _kv(lines, "knapsack_value", knap.knapsack_value)
        _kv(lines, "min_percapita_sum", knap.min_percapita_sum)
        _kv(lines, "total_cost", ledger.total)
        _kv(lines, "budget", ledger.budget)
        _kv(lines, "gini_max", eq.eta)
        _kv(lines, "gini_by_region", eq.gini)
        _kv(lines, "zeta", eq.zeta)
        if diagnostics is not None:
            _kv(lines, "termination", diagnostics.termination)
        if oracle is not None:
            _kv(lines, "oracle_objective", oracle.oracle)
            _kv(lines, "oracle_slack", oracle.slack)
            _kv(lines, "optimality_gap_percent", oracle.gap)
        if reference_cases is not None:
            _kv(lines, "reference_cases", float(reference_cases))
            _kv(lines, "infections_averted", infections_averted(reference_cases, knap.infection_flux_total))
            _kv(lines, "gap_to_reference_percent", optimality_gap(knap.infection_flux_total, reference_cases))
        _write_text(target("summary.txt"), lines)
    except OSError as err:
        raise OSError(f"failed writing report file in {out}: {err}") from err
    return ReportBundle(out, tuple(written))


def infections_averted(reference_cases, model_cases):
    return float(reference_cases) - float(model_cases)


def read_summary(path):
    """Key/value pairs of a summary or diagnostics file, values left as strings."""
    out = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        key, _, value = line.partition(": ")
        out[key] = value
    return out
