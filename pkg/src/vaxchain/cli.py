"""Command-line entry point.

Exit status: 0 on success, 1 when the problem itself is infeasible (or the
oracle guard trips), 2 on bad usage or unreadable input.
"""
import argparse
import sys
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import analysis, calibration, epidemic, formats, forecast, oracle, synthetic
from .epidemic import StateUnderflowError
from .optimizer import (GINI, KNAPSACK, MasterInfeasibleError, RoutingError, run_gini_decomposition,
                        run_knapsack_decomposition)
from .scenario import DEFAULT_TOL, AllocationPlan, check_full_feasibility, validate_scenario

EXIT_OK, EXIT_INFEASIBLE, EXIT_USAGE = 0, 1, 2
METHODS = (KNAPSACK, GINI, "oracle")
SUBCOMMANDS = ("calibrate", "optimize", "simulate", "forecast", "validate", "sensitivity", "gen")


class UsageError(Exception):
    pass


class DomainInfeasible(Exception):
    pass


@dataclass(frozen=True)
class RunConfig:
    subcommand: str
    scenario: Path = None
    timeseries: Path = None
    plan: Path = None
    method: str = KNAPSACK
    weights: tuple = None
    seed: int = 0
    tol: float = DEFAULT_TOL
    out: Path = None
    multipliers: tuple = analysis.DEFAULT_MULTIPLIERS
    parameters: tuple = analysis.PARAMETERS
    encoding: str = "ratio"
    workers: int = 1
    m_max: int = 8
    horizon: int = 4
    level: float = 0.95
    reduction: float = calibration.DEFAULT_REDUCTION
    underreporting: float = 0.0
    interpolate: bool = False
    preset: str = None
    sizes: tuple = None
    guard: float = oracle.DEFAULT_GUARD
    grid_step: float = None
    budget_relaxation: bool = False

    def __post_init__(self):
        if self.subcommand not in SUBCOMMANDS:
            raise UsageError(f"unknown subcommand {self.subcommand!r}")
        if self.method not in METHODS:
            raise UsageError(f"unknown method {self.method!r}")


def _floats(text, name):
    try:
        return tuple(float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"{name} must be a comma-separated list of numbers") from None


def _weights(text):
    vals = _floats(text, "--weights")
    if len(vals) != 4:
        raise argparse.ArgumentTypeError("--weights takes four values: lambda0,a,b,reg")
    return vals


def _multipliers(text):
    vals = _floats(text, "--multipliers")
    if any(not v > 0 for v in vals):
        raise argparse.ArgumentTypeError("multipliers must be positive")
    return vals


def _sizes(text):
    try:
        vals = tuple(int(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError("--sizes takes five integers J,K,L,M,T") from None
    if len(vals) != 5 or min(vals) < 1:
        raise argparse.ArgumentTypeError("--sizes takes five positive integers J,K,L,M,T")
    return vals


def build_parser():
    p = argparse.ArgumentParser(prog="vaxchain", description="Epidemic-aware vaccine allocation toolkit.")
    sub = p.add_subparsers(dest="subcommand", required=True)

    def common(sp, scenario=True, out=True):
        if scenario:
            sp.add_argument("--scenario", type=Path, required=True)
        if out:
            sp.add_argument("--out", type=Path, required=True)
        sp.add_argument("--seed", type=int, default=0)

    sp = sub.add_parser("gen", help="write a synthetic scenario")
    common(sp, scenario=False)
    g = sp.add_mutually_exclusive_group()
    g.add_argument("--preset", choices=sorted(synthetic.PRESETS), default="tiny")
    g.add_argument("--sizes", type=_sizes)

    sp = sub.add_parser("validate", help="check a scenario, and optionally a plan, for feasibility")
    common(sp, out=False)
    sp.add_argument("--plan", type=Path)
    sp.add_argument("--tol", type=float, default=DEFAULT_TOL)

    sp = sub.add_parser("simulate", help="simulate a plan (default: no vaccination)")
    common(sp)
    sp.add_argument("--plan", type=Path)
    sp.add_argument("--timeseries", type=Path)

    sp = sub.add_parser("optimize", help="build an allocation plan")
    common(sp)
    sp.add_argument("--method", choices=METHODS, default=KNAPSACK)
    sp.add_argument("--weights", type=_weights)
    sp.add_argument("--timeseries", type=Path)
    sp.add_argument("--tol", type=float, default=DEFAULT_TOL)
    sp.add_argument("--guard", type=float, default=oracle.DEFAULT_GUARD)
    sp.add_argument("--grid-step", type=float)
    sp.add_argument("--budget-relaxation", action="store_true")

    sp = sub.add_parser("calibrate", help="recover infection rates from observed cases and doses")
    common(sp)
    sp.add_argument("--timeseries", type=Path, required=True)
    sp.add_argument("--reduction", type=float, default=calibration.DEFAULT_REDUCTION)
    sp.add_argument("--underreporting", type=float, default=0.0)
    sp.add_argument("--interpolate", action="store_true")

    sp = sub.add_parser("forecast", help="fit seasonal models to calibrated rates and forecast")
    common(sp)
    sp.add_argument("--timeseries", type=Path, required=True)
    sp.add_argument("--m-max", type=int, default=8)
    sp.add_argument("--horizon", type=int, default=4)
    sp.add_argument("--level", type=float, default=0.95)
    sp.add_argument("--reduction", type=float, default=calibration.DEFAULT_REDUCTION)
    sp.add_argument("--underreporting", type=float, default=0.0)

    sp = sub.add_parser("sensitivity", help="one-at-a-time parameter sweep")
    common(sp)
    sp.add_argument("--parameter", choices=analysis.PARAMETERS, action="append")
    sp.add_argument("--multipliers", type=_multipliers, default=analysis.DEFAULT_MULTIPLIERS)
    sp.add_argument("--encoding", choices=analysis.ENCODINGS, default="ratio")
    sp.add_argument("--workers", type=int, default=1)
    sp.add_argument("--timeseries", type=Path)
    return p


def config_from_args(ns):
    kw = {k: v for k, v in vars(ns).items() if v is not None}
    if "parameter" in kw:
        kw["parameters"] = tuple(kw.pop("parameter"))
    return RunConfig(**kw)


# helpers

def _load_scenario(cfg):
    try:
        s = formats.parse_scenario(cfg.scenario)
    except FileNotFoundError:
        raise UsageError(f"scenario file not found: {cfg.scenario}") from None
    except ValueError as err:
        raise UsageError(f"invalid scenario {cfg.scenario}: {err}") from None
    if cfg.weights is not None:
        l0, la, lb, lreg = cfg.weights
        w = s.weights
        if cfg.method == GINI:
            w = replace(w, lambda0=l0, lambda11=la, lambda12=lb, lambda_reg=lreg)
        else:
            w = replace(w, lambda0=l0, lambda21=la, lambda22=lb, lambda_reg=lreg)
        s = s.replace(weights=w)
    return s


def _load_series(cfg, scenario):
    try:
        table = formats.parse_timeseries(cfg.timeseries)
    except FileNotFoundError:
        raise UsageError(f"time-series file not found: {cfg.timeseries}") from None
    except ValueError as err:
        raise UsageError(f"invalid time series {cfg.timeseries}: {err}") from None
    pos = {r: n for n, r in enumerate(table.regions)}
    unknown = [r for r in table.regions if r not in scenario.regions]
    if unknown:
        raise UsageError(f"time series names unknown region {unknown[0]!r}")
    missing = [r for r in scenario.regions if r not in pos]
    if missing:
        raise UsageError(f"time series has no records for region {missing[0]!r}")
    order = [pos[r] for r in scenario.regions]
    return formats.TimeSeriesTable(scenario.regions, table.cases[order], table.doses[order], table.gaps)


def _load_plan(cfg, scenario):
    try:
        return formats.read_plan(cfg.plan, scenario)
    except FileNotFoundError:
        raise UsageError(f"plan file not found: {cfg.plan}") from None
    except ValueError as err:
        raise UsageError(f"invalid plan {cfg.plan}: {err}") from None


def _reference_cases(cfg, scenario):
    if cfg.timeseries is None:
        return None
    return float(np.nansum(_load_series(cfg, scenario).cases))


def _out_dir(cfg):
    cfg.out.mkdir(parents=True, exist_ok=True)
    return cfg.out


# subcommands

def cmd_gen(cfg):
    if cfg.sizes is not None:
        s = synthetic.generate_synthetic(cfg.seed, cfg.sizes)
    else:
        s = synthetic.preset(cfg.preset or "tiny", cfg.seed)
    if cfg.out.parent and not cfg.out.parent.exists():
        cfg.out.parent.mkdir(parents=True)
    formats.write_scenario(s, cfg.out)
    print(f"wrote {cfg.out}")
    return EXIT_OK


def cmd_validate(cfg):
    s = _load_scenario(cfg)
    report = validate_scenario(s)
    print(report.summary())
    ok = report.feasible
    if cfg.plan is not None:
        plan = _load_plan(cfg, s)
        traj = epidemic.simulate(s, plan)
        full = check_full_feasibility(s, plan, traj, cfg.tol)
        print(full.summary())
        ok = ok and full.feasible
    if not ok:
        raise DomainInfeasible("validation failed")
    return EXIT_OK


def cmd_simulate(cfg):
    s = _load_scenario(cfg)
    plan = _load_plan(cfg, s) if cfg.plan is not None else AllocationPlan.zeros(s)
    traj = epidemic.simulate(s, plan)
    bundle = analysis.assemble_report(_out_dir(cfg), s, plan, traj, reference_cases=_reference_cases(cfg, s),
                                      method="simulate")
    print(f"wrote {len(bundle.files)} files to {bundle.directory}")
    return EXIT_OK


def cmd_optimize(cfg):
    s = _load_scenario(cfg)
    reference = _reference_cases(cfg, s)
    diag = None
    if cfg.method == "oracle":
        grid = oracle.GridSpec(step=cfg.grid_step, guard=cfg.guard, budget_relaxation=cfg.budget_relaxation)
        res = oracle.enumerate_optimum(s, grid)
        plan, traj = res.plan, res.trajectory
        print(f"oracle visited {res.visited} plans, {res.evaluated} feasible; objective {res.value:.17g}")
    elif cfg.method == GINI:
        plan, traj, diag, _ = run_gini_decomposition(s)
    else:
        plan, traj, diag = run_knapsack_decomposition(s)
    report = check_full_feasibility(s, plan, traj, cfg.tol)
    bundle = analysis.assemble_report(_out_dir(cfg), s, plan, traj, diag, reference_cases=reference,
                                      method=cfg.method)
    print(report.summary())
    print(f"wrote {len(bundle.files)} files to {bundle.directory}")
    if not report.feasible:
        raise DomainInfeasible("the produced plan violates the full formulation")
    return EXIT_OK


def cmd_calibrate(cfg):
    s = _load_scenario(cfg)
    table = _load_series(cfg, s)
    obs = table.observed(s.epidemic.pop_region, cfg.underreporting)
    rates = calibration.calibrate_effective_rates(obs, s.epidemic, cfg.reduction, cfg.interpolate)
    out = _out_dir(cfg)
    rows = [(r, t, rates.beta[j, t], rates.beta_vax[j, t], rates.r_effective[j, t])
            for j, r in enumerate(s.regions) for t in range(obs.horizon)]
    formats.write_table(out / "rates.tsv", ("region_id", "period", "beta", "beta_vax", "r_effective"), rows)
    issues = [(i.region, i.period, i.kind, i.message) for i in rates.issues]
    issues += [(r, t, "gap", "no record; read as zero") for r, t in table.gaps]
    formats.write_table(out / "issues.tsv", ("region_id", "period", "kind", "message"), issues)
    print(f"calibrated {len(s.regions)} regions over {obs.horizon} periods; {len(issues)} issues")
    return EXIT_OK


def cmd_forecast(cfg):
    if cfg.m_max < 1 or cfg.horizon < 1:
        raise UsageError("--m-max and --horizon must be at least 1")
    s = _load_scenario(cfg)
    table = _load_series(cfg, s)
    obs = table.observed(s.epidemic.pop_region, cfg.underreporting)
    rates = calibration.calibrate_effective_rates(obs, s.epidemic, cfg.reduction, interpolate=True)
    models, rows = [], []
    for j, r in enumerate(s.regions):
        series = rates.beta[j]
        if not np.all(np.isfinite(series)):
            models.append((r, "", "", "no usable rates"))
            continue
        try:
            fit = forecast.select_by_aic(series, range(1, cfg.m_max + 1))
        except ValueError as err:
            models.append((r, "", "", str(err)))
            continue
        fc = forecast.forecast_interval(fit, cfg.horizon, cfg.level)
        models.append((r, str(fit.order), fit.aic, "ok"))
        start = series.size
        rows += [(r, start + h, fc.point[h], fc.lower[h], fc.upper[h]) for h in range(cfg.horizon)]
    out = _out_dir(cfg)
    formats.write_table(out / "models.tsv", ("region_id", "order", "aic", "status"), models)
    formats.write_table(out / "forecast.tsv", ("region_id", "period", "point", "lower", "upper"), rows)
    print(f"forecast {cfg.horizon} periods for {len(rows) // cfg.horizon} of {len(s.regions)} regions")
    return EXIT_OK


def cmd_sensitivity(cfg):
    s = _load_scenario(cfg)
    reference = _reference_cases(cfg, s)
    tables = [analysis.run_sensitivity(s, par, cfg.multipliers, cfg.encoding, reference, cfg.workers)
              for par in cfg.parameters]
    out = _out_dir(cfg)
    analysis.write_sensitivity(out / "sensitivity.tsv", tables)
    failed = sum(r.failed for t in tables for r in t.rows)
    print(f"{sum(len(t.rows) for t in tables)} rows written to {out / 'sensitivity.tsv'}; {failed} failed")
    return EXIT_OK


COMMANDS = {"gen": cmd_gen, "validate": cmd_validate, "simulate": cmd_simulate, "optimize": cmd_optimize,
            "calibrate": cmd_calibrate, "forecast": cmd_forecast, "sensitivity": cmd_sensitivity}


def cli_dispatch(config):
    """Run one configured subcommand and return its exit status."""
    try:
        return COMMANDS[config.subcommand](config)
    except UsageError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except oracle.GuardExceededError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (DomainInfeasible, MasterInfeasibleError, RoutingError, StateUnderflowError) as err:
        print(f"infeasible: {err}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except RuntimeError as err:
        print(f"infeasible: {err}", file=sys.stderr)
        return EXIT_INFEASIBLE


def main(argv=None):
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    try:
        cfg = config_from_args(ns)
    except UsageError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_USAGE
    return cli_dispatch(cfg)


if __name__ == "__main__":
    sys.exit(main())
