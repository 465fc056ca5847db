"""Scenario documents, time-series files and tab-separated tables.

Scenarios are JSON documents keyed by entity id (see docs/scenario_schema.md).
Tables are UTF-8, tab-separated, with a header row; floats carry 17
significant digits so every value re-parses exactly.
"""
import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .scenario import (DEFAULT_CENTER_CAPACITY, DEFAULT_PERIOD_DAYS, AllocationPlan, CostLedger, CostParams,
                       EpidemicParams, ObjectiveWeights, Scenario, SupplyParams, Trajectory, default_mu,
                       plan_fields)


class SchemaError(ValueError):
    def __init__(self, path, message):
        super().__init__(f"{path or '<root>'}: {message}")
        self.path = path


# scenario documents

_TOP = {"horizon", "period_length_days", "suppliers", "regions", "subregions_of", "pharmacies_of",
        "centers_of", "epidemic", "supply", "costs", "weights", "svi", "access", "sub_beta0"}
_EPI = {"mu", "gamma", "gamma1", "psi", "t_r", "sigma", "beta", "beta_vax", "pop", "init_I",
        "init_Itilde", "init_R"}
_SUPPLY = {"supplier_capacity", "local_capacity", "demand", "center_capacity", "lead_center",
           "lead_1", "lead_2", "lead_3", "wastage"}
_COSTS = {"budget", "dose_cost", "admin_cost", "transport_1", "transport_2", "transport_3",
          "holding_1", "holding_2", "holding_3", "open_cost"}
_WEIGHTS = {"lambda0", "lambda11", "lambda12", "lambda21", "lambda22", "lambda_reg", "normalize"}


def _obj(value, path):
    if not isinstance(value, dict):
        raise SchemaError(path, "expected an object")
    return value


def _closed(value, allowed, path):
    _obj(value, path)
    extra = sorted(set(value) - allowed)
    if extra:
        raise SchemaError(f"{path}.{extra[0]}" if path else extra[0], "unknown field")
    return value


def _req(obj, key, path):
    if key not in obj:
        raise SchemaError(f"{path}.{key}" if path else key, "missing required field")
    return obj[key]


def _num(value, path, integer=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SchemaError(path, "expected a number")
    if not math.isfinite(value):
        raise SchemaError(path, "expected a finite number")
    if integer and value != int(value):
        raise SchemaError(path, "expected an integer")
    return int(value) if integer else float(value)


def _ids(value, path):
    if not isinstance(value, list) or not all(isinstance(v, str) for v in value):
        raise SchemaError(path, "expected a list of ids")
    if len(set(value)) != len(value):
        raise SchemaError(path, "duplicate id")
    return tuple(value)


def _keys_match(obj, ids, path):
    _obj(obj, path)
    unknown = [k for k in obj if k not in set(ids)]
    if unknown:
        raise SchemaError(f"{path}.{unknown[0]}", "unknown id")
    missing = [k for k in ids if k not in obj]
    if missing:
        raise SchemaError(f"{path}.{missing[0]}", "missing entry")


def _series_map(obj, ids, T, path):
    _keys_match(obj, ids, path)
    out = np.zeros((len(ids), T))
    for n, k in enumerate(ids):
        row = obj[k]
        if not isinstance(row, list) or len(row) != T:
            raise SchemaError(f"{path}.{k}", f"expected a list of {T} numbers")
        out[n] = [_num(v, f"{path}.{k}[{t}]") for t, v in enumerate(row)]
    return out


def _scalar_map(obj, ids, path, integer=False):
    _keys_match(obj, ids, path)
    return np.array([_num(obj[k], f"{path}.{k}", integer) for k in ids], dtype=int if integer else float)


def _pair_map(obj, rows, cols, path, integer=False):
    _keys_match(obj, rows, path)
    out = np.zeros((len(rows), len(cols)), dtype=int if integer else float)
    for n, r in enumerate(rows):
        out[n] = _scalar_map(obj[r], cols, f"{path}.{r}", integer)
    return out


def _opt(obj, key, default):
    return obj[key] if key in obj else default


def scenario_from_dict(doc):
    """Validated :class:`Scenario` from a parsed document, defaults applied."""
    _closed(doc, _TOP, "")
    T = _num(_req(doc, "horizon", ""), "horizon", integer=True)
    if T < 1:
        raise SchemaError("horizon", "must be at least 1")
    days = _num(_opt(doc, "period_length_days", DEFAULT_PERIOD_DAYS), "period_length_days", integer=True)
    suppliers = _ids(_req(doc, "suppliers", ""), "suppliers")
    regions = _ids(_req(doc, "regions", ""), "regions")
    if not suppliers:
        raise SchemaError("suppliers", "must not be empty")
    if not regions:
        raise SchemaError("regions", "must not be empty")
    subs_of = _obj(_req(doc, "subregions_of", ""), "subregions_of")
    _keys_match(subs_of, regions, "subregions_of")
    subs_of = {j: _ids(subs_of[j], f"subregions_of.{j}") for j in regions}
    subs = tuple(k for j in regions for k in subs_of[j])
    if len(set(subs)) != len(subs):
        raise SchemaError("subregions_of", "a sub-region is listed under more than one region")
    for j in regions:
        if not subs_of[j]:
            raise SchemaError(f"subregions_of.{j}", "must not be empty")
    ph_of = _obj(_req(doc, "pharmacies_of", ""), "pharmacies_of")
    _keys_match(ph_of, subs, "pharmacies_of")
    ph_of = {k: _ids(ph_of[k], f"pharmacies_of.{k}") for k in subs}
    pharms = tuple(p for k in subs for p in ph_of[k])
    if len(set(pharms)) != len(pharms):
        raise SchemaError("pharmacies_of", "a pharmacy is listed under more than one sub-region")
    for k in subs:
        if not ph_of[k]:
            raise SchemaError(f"pharmacies_of.{k}", "must not be empty")
    c_of = _obj(_opt(doc, "centers_of", {j: [] for j in regions}), "centers_of")
    _keys_match(c_of, regions, "centers_of")
    c_of = {j: _ids(c_of[j], f"centers_of.{j}") for j in regions}
    centers = tuple(o for j in regions for o in c_of[j])
    if len(set(centers)) != len(centers):
        raise SchemaError("centers_of", "duplicate center id")

    ep = _closed(_req(doc, "epidemic", ""), _EPI, "epidemic")
    pop_doc = _obj(_req(ep, "pop", "epidemic"), "epidemic.pop")
    _keys_match(pop_doc, regions + subs, "epidemic.pop")
    zeros_j = {j: 0 for j in regions}
    epi = EpidemicParams(
        beta=_series_map(_req(ep, "beta", "epidemic"), regions, T, "epidemic.beta"),
        beta_vax=_series_map(_req(ep, "beta_vax", "epidemic"), regions, T, "epidemic.beta_vax"),
        pop_region=_scalar_map({j: pop_doc[j] for j in regions}, regions, "epidemic.pop"),
        pop_sub=_scalar_map({k: pop_doc[k] for k in subs}, subs, "epidemic.pop"),
        init_I=_scalar_map(_req(ep, "init_I", "epidemic"), regions, "epidemic.init_I"),
        init_Itilde=_scalar_map(_opt(ep, "init_Itilde", zeros_j), regions, "epidemic.init_Itilde"),
        init_R=_scalar_map(_opt(ep, "init_R", zeros_j), regions, "epidemic.init_R"),
        sigma=np.array([_num(v, f"epidemic.sigma[{t}]") for t, v in enumerate(_opt(ep, "sigma", [0.0] * T))]),
        mu=_num(_opt(ep, "mu", default_mu(days)), "epidemic.mu"),
        gamma=_num(_opt(ep, "gamma", 1.0), "epidemic.gamma"),
        gamma1=_num(_opt(ep, "gamma1", 1.0), "epidemic.gamma1"),
        psi=_num(_opt(ep, "psi", 0), "epidemic.psi", integer=True),
        t_r=_num(_opt(ep, "t_r", 1), "epidemic.t_r", integer=True),
    )
    if epi.sigma.size != T:
        raise SchemaError("epidemic.sigma", f"expected a list of {T} numbers")

    sp = _closed(_req(doc, "supply", ""), _SUPPLY, "supply")
    supply = SupplyParams(
        supplier_capacity=_series_map(_req(sp, "supplier_capacity", "supply"), suppliers, T, "supply.supplier_capacity"),
        local_capacity=_series_map(_req(sp, "local_capacity", "supply"), subs, T, "supply.local_capacity"),
        demand=_series_map(_req(sp, "demand", "supply"), regions, T, "supply.demand"),
        center_capacity=_series_map(
            _opt(sp, "center_capacity", {o: [DEFAULT_CENTER_CAPACITY] * T for o in centers}),
            centers, T, "supply.center_capacity"),
        lead_1=_pair_map(_opt(sp, "lead_1", {i: zeros_j for i in suppliers}), suppliers, regions,
                         "supply.lead_1", integer=True),
        lead_2=_scalar_map(_opt(sp, "lead_2", {k: 0 for k in subs}), subs, "supply.lead_2", integer=True),
        lead_3=_scalar_map(_opt(sp, "lead_3", {p: 0 for p in pharms}), pharms, "supply.lead_3", integer=True),
        lead_center=_num(_opt(sp, "lead_center", 1), "supply.lead_center", integer=True),
        wastage=_num(_opt(sp, "wastage", 0.0), "supply.wastage"),
    )

    co = _closed(_req(doc, "costs", ""), _COSTS, "costs")
    zero = lambda ids: {i: 0.0 for i in ids}  # noqa: E731
    costs = CostParams(
        budget=_num(_req(co, "budget", "costs"), "costs.budget"),
        dose_cost=_series_map(_req(co, "dose_cost", "costs"), suppliers, T, "costs.dose_cost"),
        admin_cost=_series_map(_req(co, "admin_cost", "costs"), regions, T, "costs.admin_cost"),
        transport_1=_pair_map(_opt(co, "transport_1", {i: zero(regions) for i in suppliers}), suppliers, regions,
                              "costs.transport_1"),
        transport_2=_scalar_map(_opt(co, "transport_2", zero(subs)), subs, "costs.transport_2"),
        transport_3=_scalar_map(_opt(co, "transport_3", zero(pharms)), pharms, "costs.transport_3"),
        holding_1=_scalar_map(_opt(co, "holding_1", zero(regions)), regions, "costs.holding_1"),
        holding_2=_scalar_map(_opt(co, "holding_2", zero(subs)), subs, "costs.holding_2"),
        holding_3=_scalar_map(_opt(co, "holding_3", zero(pharms)), pharms, "costs.holding_3"),
        open_cost=_scalar_map(_opt(co, "open_cost", zero(centers)), centers, "costs.open_cost"),
    )

    wd = _closed(_opt(doc, "weights", {}), _WEIGHTS, "weights")
    kw = {k: _num(v, f"weights.{k}") for k, v in wd.items() if k != "normalize"}
    if "normalize" in wd and not isinstance(wd["normalize"], bool):
        raise SchemaError("weights.normalize", "expected true or false")
    try:
        weights = ObjectiveWeights(normalize=wd.get("normalize", False), **kw)
    except ValueError as err:
        raise SchemaError("weights", str(err)) from None

    sub_beta0 = None
    if "sub_beta0" in doc:
        sub_beta0 = _scalar_map(doc["sub_beta0"], subs, "sub_beta0")
    return Scenario(
        horizon=T, suppliers=suppliers, regions=regions, subregions_of=subs_of, pharmacies_of=ph_of,
        centers_of=c_of, epidemic=epi, supply=supply, costs=costs, weights=weights,
        svi=_scalar_map(_req(doc, "svi", ""), subs, "svi"),
        access=_scalar_map(_req(doc, "access", ""), regions, "access"),
        sub_beta0=sub_beta0, period_length_days=days,
    )


def parse_scenario(path):
    """Read and validate a scenario document."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise
    except json.JSONDecodeError as err:
        raise SchemaError("", f"{path}: not valid JSON ({err.msg} at line {err.lineno})") from None
    return scenario_from_dict(doc)


def _f(v):
    return float(v)


def _row_map(ids, arr):
    return {k: [_f(v) for v in row] for k, row in zip(ids, np.asarray(arr))}


def _val_map(ids, arr, integer=False):
    return {k: (int(v) if integer else _f(v)) for k, v in zip(ids, np.asarray(arr))}


def scenario_to_dict(s):
    e, sp, c, w = s.epidemic, s.supply, s.costs, s.weights
    pop = _val_map(s.regions, e.pop_region)
    pop.update(_val_map(s.subregions, e.pop_sub))
    return {
        "horizon": s.horizon,
        "period_length_days": s.period_length_days,
        "suppliers": list(s.suppliers),
        "regions": list(s.regions),
        "subregions_of": {j: list(s.subregions_of.get(j, ())) for j in s.regions},
        "pharmacies_of": {k: list(s.pharmacies_of.get(k, ())) for k in s.subregions},
        "centers_of": {j: list(s.centers_of.get(j, ())) for j in s.regions},
        "epidemic": {
            "mu": e.mu, "gamma": e.gamma, "gamma1": e.gamma1, "psi": int(e.psi), "t_r": int(e.t_r),
            "sigma": [_f(v) for v in e.sigma],
            "beta": _row_map(s.regions, e.beta), "beta_vax": _row_map(s.regions, e.beta_vax),
            "pop": pop,
            "init_I": _val_map(s.regions, e.init_I), "init_Itilde": _val_map(s.regions, e.init_Itilde),
            "init_R": _val_map(s.regions, e.init_R),
        },
        "supply": {
            "supplier_capacity": _row_map(s.suppliers, sp.supplier_capacity),
            "local_capacity": _row_map(s.subregions, sp.local_capacity),
            "demand": _row_map(s.regions, sp.demand),
            "center_capacity": _row_map(s.centers, sp.center_capacity),
            "lead_center": int(sp.lead_center),
            "lead_1": {i: _val_map(s.regions, row, True) for i, row in zip(s.suppliers, sp.lead_1)},
            "lead_2": _val_map(s.subregions, sp.lead_2, True),
            "lead_3": _val_map(s.pharmacies, sp.lead_3, True),
            "wastage": sp.wastage,
        },
        "costs": {
            "budget": c.budget,
            "dose_cost": _row_map(s.suppliers, c.dose_cost), "admin_cost": _row_map(s.regions, c.admin_cost),
            "transport_1": {i: _val_map(s.regions, row) for i, row in zip(s.suppliers, c.transport_1)},
            "transport_2": _val_map(s.subregions, c.transport_2),
            "transport_3": _val_map(s.pharmacies, c.transport_3),
            "holding_1": _val_map(s.regions, c.holding_1), "holding_2": _val_map(s.subregions, c.holding_2),
            "holding_3": _val_map(s.pharmacies, c.holding_3), "open_cost": _val_map(s.centers, c.open_cost),
        },
        "weights": {"lambda0": w.lambda0, "lambda11": w.lambda11, "lambda12": w.lambda12,
                    "lambda21": w.lambda21, "lambda22": w.lambda22, "lambda_reg": w.lambda_reg,
                    "normalize": w.normalize},
        "svi": _val_map(s.subregions, s.svi),
        "access": _val_map(s.regions, s.access),
        "sub_beta0": _val_map(s.subregions, s.sub_beta0),
    }


def write_scenario(scenario, path):
    Path(path).write_text(json.dumps(scenario_to_dict(scenario), indent=1) + "\n", encoding="utf-8")


# tables

def fmt(value):
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_table(path, header, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        wr = csv.writer(fh, delimiter="\t", lineterminator="\n")
        wr.writerow(header)
        for row in rows:
            wr.writerow([fmt(v) for v in row])


def read_table(path):
    """Header and rows (as strings) of a tab-separated file."""
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh, delimiter="\t"))
    if not rows:
        raise ValueError(f"{path}: empty table")
    return rows[0], rows[1:]


# observed time series

TIMESERIES_HEADER = ("region_id", "period", "cases", "doses")


@dataclass(frozen=True)
class TimeSeriesTable:
    regions: tuple
    cases: np.ndarray
    doses: np.ndarray
    gaps: tuple

    @property
    def horizon(self):
        return self.cases.shape[1]

    def observed(self, pop, underreporting_rate=0.0):
        """Dense observed series; gap entries are read as zero and listed in ``gaps``."""
        from .calibration import ObservedSeries

        return ObservedSeries(self.regions, np.nan_to_num(self.cases), np.nan_to_num(self.doses), pop,
                              underreporting_rate, self.gaps)


def parse_timeseries(path):
    header, rows = read_table(path)
    if tuple(h.strip() for h in header) != TIMESERIES_HEADER:
        raise SchemaError("header", f"expected columns {', '.join(TIMESERIES_HEADER)}")
    if not rows:
        raise ValueError(f"{path}: no records")
    order, data, last = [], {}, {}
    for n, row in enumerate(rows, start=2):
        if len(row) != 4:
            raise SchemaError(f"line {n}", "expected 4 columns")
        rid = row[0]
        try:
            t = int(row[1])
            cases, doses = float(row[2]), float(row[3])
        except ValueError:
            raise SchemaError(f"line {n}", "period must be an integer and cases/doses numbers") from None
        if t < 0:
            raise SchemaError(f"line {n}", "negative period")
        if rid not in data:
            order.append(rid)
            data[rid] = {}
        if t in data[rid]:
            raise ValueError(f"line {n}: duplicate record for region {rid} period {t}")
        if rid in last and t < last[rid]:
            raise ValueError(f"line {n}: periods for region {rid} are not increasing")
        last[rid] = t
        data[rid][t] = (cases, doses)
    T = max(max(d) for d in data.values()) + 1
    cases = np.full((len(order), T), np.nan)
    doses = np.full((len(order), T), np.nan)
    gaps = []
    for j, rid in enumerate(order):
        for t in range(T):
            if t in data[rid]:
                cases[j, t], doses[j, t] = data[rid][t]
            else:
                gaps.append((rid, t))
    return TimeSeriesTable(tuple(order), cases, doses, tuple(gaps))


def write_timeseries(path, regions, cases, doses):
    rows = []
    for j, rid in enumerate(regions):
        for t in range(np.asarray(cases).shape[1]):
            if np.isnan(cases[j][t]):
                continue
            rows.append((rid, t, float(cases[j][t]), float(doses[j][t])))
    write_table(path, TIMESERIES_HEADER, rows)


# run artifacts

PLAN_HEADER = ("field", "index", "period", "value")
TRAJECTORY_HEADER = ("region_id", "period", "S", "V", "I", "R", "Itilde", "new_infections", "tau")
LEDGER_HEADER = ("period",) + CostLedger.ITEMS + ("total", "cumulative", "budget")

_AXIS_IDS = {"J": "regions", "K": "subregions", "L": "pharmacies", "O": "centers", "M": "suppliers"}


def _axis_labels(scenario, axes):
    return [getattr(scenario, _AXIS_IDS[a]) for a in axes[:-1]]


def write_plan(path, scenario, plan):
    """Long-format plan table: one row per (field, entity, period)."""
    rows = []
    for name, axes in plan_fields().items():
        arr = np.asarray(getattr(plan, name))
        labels = _axis_labels(scenario, axes)
        for idx in np.ndindex(arr.shape):
            key = "|".join(labels[n][i] for n, i in enumerate(idx[:-1])) if labels else "-"
            rows.append((name, key, idx[-1], float(arr[idx])))
    write_table(path, PLAN_HEADER, rows)


def read_plan(path, scenario):
    header, rows = read_table(path)
    if tuple(header) != PLAN_HEADER:
        raise SchemaError(f"{path}: header", f"expected columns {', '.join(PLAN_HEADER)}")
    plan = AllocationPlan.zeros(scenario)
    arrays = {name: np.array(v) for name, v in plan.as_dict().items()}
    positions = {a: {k: n for n, k in enumerate(getattr(scenario, ids))} for a, ids in _AXIS_IDS.items()}
    fields = plan_fields()
    for n, (name, key, period, value) in enumerate(rows, start=2):
        if name not in fields:
            raise SchemaError(f"{path}: line {n}", f"unknown plan field {name!r}")
        axes = fields[name]
        try:
            idx = tuple(positions[a][k] for a, k in zip(axes[:-1], key.split("|"))) if len(axes) > 1 else ()
        except KeyError:
            raise SchemaError(f"{path}: line {n}", f"unknown id in {key!r}") from None
        arrays[name][idx + (int(period),)] = float(value)
    return AllocationPlan(**arrays)


def write_trajectory(path, scenario, traj):
    T = traj.horizon
    rows = []
    for j, rid in enumerate(scenario.regions):
        for t in range(T + 1):
            flux = traj.new_infections[j, t] if t < T else ""
            tau = traj.tau[j, t] if t < T else ""
            rows.append((rid, t, traj.S[j, t], traj.V[j, t], traj.I[j, t], traj.R[j, t], traj.Itilde[j, t],
                         flux, tau))
    write_table(path, TRAJECTORY_HEADER, rows)


def read_trajectory(path, scenario):
    header, rows = read_table(path)
    if tuple(header) != TRAJECTORY_HEADER:
        raise SchemaError(f"{path}: header", f"expected columns {', '.join(TRAJECTORY_HEADER)}")
    J, T = scenario.n_regions, scenario.horizon
    pos = {r: n for n, r in enumerate(scenario.regions)}
    comp = {c: np.zeros((J, T + 1)) for c in ("S", "V", "I", "R", "Itilde")}
    flux, tau = np.zeros((J, T)), np.zeros((J, T))
    for row in rows:
        j, t = pos[row[0]], int(row[1])
        for c, v in zip(("S", "V", "I", "R", "Itilde"), row[2:7]):
            comp[c][j, t] = float(v)
        if t < T:
            flux[j, t], tau[j, t] = float(row[7]), float(row[8])
    return Trajectory(new_infections=flux, tau=tau, **comp)


def write_ledger(path, ledger):
    per = ledger.per_period
    cum = ledger.cumulative
    rows = [(t,) + tuple(float(getattr(ledger, item)[t]) for item in CostLedger.ITEMS)
            + (float(per[t]), float(cum[t]), ledger.budget) for t in range(per.size)]
    write_table(path, LEDGER_HEADER, rows)


def read_ledger(path):
    header, rows = read_table(path)
    if tuple(header) != LEDGER_HEADER:
        raise SchemaError(f"{path}: header", f"expected columns {', '.join(LEDGER_HEADER)}")
    cols = np.array([[float(v) for v in row[1:1 + len(CostLedger.ITEMS)]] for row in rows]).reshape(
        len(rows), len(CostLedger.ITEMS))
    budget = float(rows[0][-1]) if rows else 0.0
    return CostLedger(*(cols[:, n] for n in range(len(CostLedger.ITEMS))), budget=budget)


BUNDLED = ("tiny_1", "tiny_2", "tiny_3", "tiny_4", "tiny_5", "uniform_regional", "midsize")


def bundled_path(name):
    from importlib import resources

    if name not in BUNDLED:
        raise ValueError(f"unknown bundled scenario {name!r}; choose from {', '.join(BUNDLED)}")
    return resources.files("vaxchain") / "data" / f"{name}.json"


def bundled_scenario(name):
    return parse_scenario(bundled_path(name))
