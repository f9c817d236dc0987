"""JSON instance/scenario files, the US vaccine fixture, and experiment runs.

Files are strict: unknown keys are rejected and every schema error names the
offending field path. Demand matrices are nested arrays, site-major and
period-minor. Numbers are written with ``repr`` so a save/load cycle returns
bit-identical floats.
"""
from __future__ import annotations

import csv
import io as _io
import json
import logging
import math
from dataclasses import asdict, dataclass, field, fields
from importlib import resources
from pathlib import Path
from typing import Optional, Sequence

import jsonschema
import numpy as np

from .evaluation import (APPROACHES, PERCENTILES, Comparison, PlanEvaluation, apply_dc_policy,
                         apply_scarcity, compare_approaches)
from .instance import DC_STATUSES, Instance, InputError, ScenarioSet, Site
from .scenarios import (AmbiguitySpec, MomentEstimate, build_ambiguity_bounds, empirical_moments,
                        moments_from_quantiles, penalty_schedule, sample_normal_scenarios,
                        sample_uniform_scenarios)

log = logging.getLogger(__name__)

BREAKDOWN_COLUMNS = ("approach", "operating", "capacity", "shipping", "inventory", "penalty",
                     "total", "unmet_mean", "unmet_std") + tuple(f"unmet_p{q}" for q in PERCENTILES)

EARTH_RADIUS_MILES = 3958.8

_num = {"type": "number"}
_nonneg = {"type": "number", "minimum": 0}


def _arr(depth, item=None):
    s = item or _nonneg
    for _ in range(depth):
        s = {"type": "array", "items": s}
    return s


_site = {
    "type": "object",
    "additionalProperties": False,
    "required": ["id"],
    "properties": {
        "id": {"type": "string", "minLength": 1},
        "label": {"type": "string"},
        "lat": {"type": ["number", "null"]},
        "lon": {"type": ["number", "null"]},
    },
}

INSTANCE_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "required": ["dc_sites", "demand_sites", "n_periods", "operating_cost",
                 "capacity_unit_cost", "shipping_unit_cost", "inventory_unit_cost",
                 "penalty_unit_cost", "dc_capacity_limit", "temporal_budget",
                 "initial_inventory", "initial_backlog", "dc_status"],
    "properties": {
        "name": {"type": "string"},
        "dc_sites": {"type": "array", "minItems": 1, "items": _site},
        "demand_sites": {"type": "array", "minItems": 1, "items": _site},
        "n_periods": {"type": "integer", "minimum": 1},
        "operating_cost": _arr(1, _num),
        "capacity_unit_cost": {"oneOf": [_arr(1, _num), _arr(2, _num)]},
        "shipping_unit_cost": _arr(3, _num),
        "inventory_unit_cost": _arr(2, _num),
        "penalty_unit_cost": _arr(2, _num),
        "dc_capacity_limit": _arr(1, _num),
        "temporal_budget": _arr(1, _num),
        "initial_inventory": _arr(1, _num),
        "initial_backlog": _arr(1, _num),
        "dc_status": {"type": "array", "items": {"enum": list(DC_STATUSES)}},
        "dc_inventory_unit_cost": _arr(2, _num),
        "initial_dc_inventory": _arr(1, _num),
        "lead_time": _arr(2, {"type": "integer"}),
        "metadata": {"type": "object"},
    },
}

SCENARIO_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "required": ["demand", "probabilities"],
    "properties": {
        "demand": {"type": "array", "minItems": 1, "items": _arr(2)},
        "probabilities": {"type": "array", "minItems": 1, "items": _nonneg},
    },
}

_phase = {
    "type": "object",
    "additionalProperties": False,
    "required": ["name", "n_periods", "daily_capacity"],
    "properties": {
        "name": {"type": "string"},
        "start": {"type": "string", "format": "date"},
        "period_days": {"type": "integer", "minimum": 1},
        "n_periods": {"type": "integer", "minimum": 1},
        "daily_capacity": _nonneg,
        "totals": _arr(1),
        "quantiles": {
            "type": "object",
            "additionalProperties": False,
            "required": ["q025", "median", "q975"],
            "properties": {k: _arr(1) for k in ("q025", "median", "q975")},
        },
    },
}

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "instance": {"type": "string"},
        "approaches": {"type": "array", "minItems": 1, "items": {"enum": list(APPROACHES)}},
        "phase": {"type": "string"},
        "phases": {"type": "array", "items": _phase},
        "scale": {"type": "number", "exclusiveMinimum": 0},
        "distribution": {"enum": ["uniform", "normal"]},
        "half_width": {"type": "number", "minimum": 0, "maximum": 1},
        "in_count": {"type": "integer", "minimum": 1},
        "in_seed": {"type": "integer", "minimum": 0},
        "out_count": {"type": "integer", "minimum": 1},
        "out_seed": {"type": "integer", "minimum": 0},
        "support_count": {"type": ["integer", "null"], "minimum": 1},
        "mean_slack": _nonneg,
        "second_lo": {"type": "number", "minimum": 0, "maximum": 1},
        "second_hi": {"type": "number", "minimum": 1},
        "scarcity": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
        "dc_policy": {"enum": ["default", "best_case", "most_restrictive"]},
        "preopened": {"type": ["array", "null"], "items": {"type": "string"}},
        "penalty_case": {"enum": ["i", "ii", "iii", "constant", "median_based", "elder_based"]},
        "penalty_constant": _nonneg,
        "penalty_medians": _arr(2),
        "elders": _arr(1),
        "node_limit": {"type": "integer", "minimum": 1},
        "gap_tol": _nonneg,
        "lp_method": {"enum": ["auto", "simplex", "highs"]},
    },
}


def _path(err) -> str:
    parts = [str(p) for p in err.absolute_path]
    return "/" + "/".join(parts) if parts else "<root>"


def _validate(data, schema, what: str):
    validator = jsonschema.Draft202012Validator(schema, format_checker=jsonschema.FormatChecker())
    errors = sorted(validator.iter_errors(data), key=lambda e: list(map(str, e.absolute_path)))
    if errors:
        e = errors[0]
        raise InputError(f"{what} field {_path(e)}: {e.message}")


def read_json(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise InputError(f"file not found: {path}") from None
    except json.JSONDecodeError as e:
        raise InputError(f"{path}: invalid JSON ({e})") from None


def write_json(obj, path):
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=1, sort_keys=False)
        fh.write("\n")


def _tolist(a):
    return None if a is None else np.asarray(a).tolist()


# -- instances and scenarios ------------------------------------------------

def instance_to_dict(inst: Instance) -> dict:
    d = {"name": inst.name}
    d["dc_sites"] = [_site_dict(s) for s in inst.dc_sites]
    d["demand_sites"] = [_site_dict(s) for s in inst.demand_sites]
    d["n_periods"] = inst.n_periods
    for f in ("operating_cost", "capacity_unit_cost", "shipping_unit_cost",
              "inventory_unit_cost", "penalty_unit_cost", "dc_capacity_limit",
              "temporal_budget", "initial_inventory", "initial_backlog"):
        d[f] = _tolist(getattr(inst, f))
    d["dc_status"] = list(inst.dc_status)
    if inst.dc_inventory_unit_cost is not None:
        d["dc_inventory_unit_cost"] = _tolist(inst.dc_inventory_unit_cost)
    if inst.initial_dc_inventory is not None:
        d["initial_dc_inventory"] = _tolist(inst.initial_dc_inventory)
    if inst.lead_time is not None:
        d["lead_time"] = inst.lead_times().tolist()
    if inst.metadata is not None:
        d["metadata"] = inst.metadata
    return d


def _site_dict(s: Site) -> dict:
    d = {"id": s.id, "label": s.label}
    if s.lat is not None:
        d["lat"] = s.lat
        d["lon"] = s.lon
    return d


def instance_from_dict(data: dict) -> Instance:
    _validate(data, INSTANCE_SCHEMA, "instance")
    kw = dict(data)
    kw.setdefault("name", "")
    try:
        return Instance(**kw)
    except (TypeError, ValueError) as e:
        raise InputError(f"instance: {e}") from None


def load_instance(path) -> Instance:
    """Load an instance file. Shape and sign problems are left to validate_instance."""
    return instance_from_dict(read_json(path))


def save_instance(inst: Instance, path) -> None:
    write_json(instance_to_dict(inst), path)


def scenarios_to_dict(sc: ScenarioSet) -> dict:
    return {"demand": sc.demand.tolist(), "probabilities": sc.probabilities.tolist()}


def load_scenarios(path) -> ScenarioSet:
    data = read_json(path)
    _validate(data, SCENARIO_SCHEMA, "scenario set")
    try:
        return ScenarioSet(np.array(data["demand"], dtype=float), data["probabilities"])
    except ValueError as e:
        raise InputError(f"scenario set: {e}") from None


def save_scenarios(sc: ScenarioSet, path) -> None:
    write_json(scenarios_to_dict(sc), path)


def evaluation_to_dict(ev: PlanEvaluation, approach: str = "") -> dict:
    d = ev.summary_row(approach)
    d["unmet_percentiles"] = {str(q): v for q, v in ev.unmet_percentiles.items()}
    d["regional_unmet_pct"] = ev.regional_unmet_pct.tolist()
    d["recourse"] = ev.recourse.tolist()
    d["unmet"] = ev.unmet.tolist()
    d["backlog_periods"] = ev.backlog_periods.tolist()
    d["probabilities"] = ev.probabilities.tolist()
    return d


def save_results(result, path, approach: str = "") -> None:
    """Write a PlanEvaluation or a Comparison as JSON."""
    if isinstance(result, PlanEvaluation):
        out = evaluation_to_dict(result, approach)
    elif isinstance(result, Comparison):
        out = {"rows": []}
        for r in result.rows:
            d = evaluation_to_dict(r.evaluation, r.approach)
            d["pct_over_best"] = r.pct_over_best
            d["x"] = r.plan.x.tolist()
            d["h"] = r.plan.h.tolist()
            d["milp_status"] = r.plan.solution.status
            out["rows"].append(d)
    else:
        raise TypeError(f"cannot save {type(result).__name__}")
    write_json(out, path)


# -- shipping costs ---------------------------------------------------------

def haversine_miles(a, b) -> float:
    """Great-circle distance between two (lat, lon) points in miles."""
    lat1, lon1, lat2, lon2 = map(math.radians, (a[0], a[1], b[0], b[1]))
    h = math.sin((lat2 - lat1) / 2) ** 2 + math.cos(lat1) * math.cos(lat2) * math.sin((lon2 - lon1) / 2) ** 2
    return 2 * EARTH_RADIUS_MILES * math.asin(math.sqrt(min(h, 1.0)))


def shipping_cost_per_unit(distance_miles, per_mile_cost=3.0, units_per_truck=230_400,
                           refrigeration_per_unit=0.0):
    """Truck cost per unit over a distance plus a per-unit refrigeration charge."""
    d = np.asarray(distance_miles, dtype=float)
    if units_per_truck is None or units_per_truck <= 0:
        raise InputError("units_per_truck must be positive")
    if np.any(d < 0) or per_mile_cost < 0 or refrigeration_per_unit < 0:
        raise InputError("distance and costs must be nonnegative")
    out = per_mile_cost * d / units_per_truck + refrigeration_per_unit
    return float(out) if out.ndim == 0 else out


def distance_matrix(dc_sites: Sequence[Site], demand_sites: Sequence[Site]) -> np.ndarray:
    D = np.zeros((len(dc_sites), len(demand_sites)))
    for i, a in enumerate(dc_sites):
        for j, b in enumerate(demand_sites):
            if a.coords is None or b.coords is None:
                raise InputError(f"missing coordinates for {a.id} or {b.id}")
            D[i, j] = haversine_miles(a.coords, b.coords)
    return D


# -- US vaccine fixture -----------------------------------------------------

# (id, label, lat, lon, monthly warehouse rent in $ per sq ft; rents are
# assumed values of plausible magnitude, not published figures)
US_DCS = (
    ("kalamazoo", "Kalamazoo, MI", 42.2917, -85.5872, 0.55),
    ("pleasant_prairie", "Pleasant Prairie, WI", 42.5531, -87.9334, 0.60),
    ("bloomington", "Bloomington, IN", 39.1653, -86.5264, 0.50),
    ("norwood", "Norwood, MA", 42.1945, -71.1995, 0.95),
    ("saint_louis", "Saint Louis, MO", 38.6270, -90.1994, 0.50),
    ("boston", "Boston, MA", 42.3601, -71.0589, 1.10),
    ("new_york", "New York City, NY", 40.7128, -74.0060, 1.40),
    ("philadelphia", "Philadelphia, PA", 39.9526, -75.1652, 0.75),
    ("atlanta", "Atlanta, GA", 33.7490, -84.3880, 0.60),
    ("chicago", "Chicago, IL", 41.8781, -87.6298, 0.70),
    ("dallas", "Dallas, TX", 32.7767, -96.7970, 0.60),
    ("kansas_city", "Kansas City, KS", 39.1142, -94.6275, 0.50),
    ("denver", "Denver, CO", 39.7392, -104.9903, 0.80),
    ("san_francisco", "San Francisco, CA", 37.7749, -122.4194, 1.50),
    ("seattle", "Seattle, WA", 47.6062, -122.3321, 1.00),
)
US_PREOPENED = ("kalamazoo", "pleasant_prairie", "bloomington", "norwood", "saint_louis")
US_REGIONS = (
    ("region1", "Region 1 - Boston", 42.3601, -71.0589),
    ("region2", "Region 2 - New York", 40.7128, -74.0060),
    ("region3", "Region 3 - Philadelphia", 39.9526, -75.1652),
    ("region4", "Region 4 - Atlanta", 33.7490, -84.3880),
    ("region5", "Region 5 - Chicago", 41.8781, -87.6298),
    ("region6", "Region 6 - Dallas", 32.7767, -96.7970),
    ("region7", "Region 7 - Kansas City", 39.1142, -94.6275),
    ("region8", "Region 8 - Denver", 39.7392, -104.9903),
    ("region9", "Region 9 - San Francisco", 37.7749, -122.4194),
    ("region10", "Region 10 - Seattle", 47.6062, -122.3321),
)
# mean doses per phase and region
US_PHASE_TOTALS = {
    "phase1": (1.0e6, 1.3e6, 2.2e6, 3.9e6, 2.0e6, 3.0e6, 970.0e3, 920.4e3, 3.3e6, 968.5e3),
    "phase2": (6.8e6, 9.0e6, 14.7e6, 26.3e6, 13.4e6, 20.1e6, 6.6e6, 6.3e6, 22.6e6, 6.6e6),
    "phase3": (8.4e6, 11.2e6, 18.2e6, 32.5e6, 16.6e6, 24.8e6, 8.1e6, 7.7e6, 27.9e6, 8.1e6),
}
US_PHASES = (
    {"name": "phase1", "start": "2020-12-14", "period_days": 14, "n_periods": 2, "daily_capacity": 500_000},
    {"name": "phase2", "start": "2021-01-11", "period_days": 14, "n_periods": 4, "daily_capacity": 750_000},
    {"name": "phase3", "start": "2021-03-08", "period_days": 14, "n_periods": 6, "daily_capacity": 1_000_000},
)
WAREHOUSE_SQFT = 10_000
VACCINE_UNIT_COST = 25.0
VACCINE_HOLDING_COST = 0.00008
VACCINE_PENALTY = 100.0


def make_us_fixture() -> Instance:
    """The 15-DC, 10-region vaccine instance for one period, Phase-1 capacities.

    Time-indexed arrays have a single period; build_phase_instance stretches
    them to a phase's length. Refrigeration cost per dose is taken as 0.
    """
    dcs = [Site(i, lab, la, lo) for i, lab, la, lo, _ in US_DCS]
    regions = [Site(i, lab, la, lo) for i, lab, la, lo in US_REGIONS]
    I, J = len(dcs), len(regions)
    ship = shipping_cost_per_unit(distance_matrix(dcs, regions))
    M = np.full(I, US_PHASES[0]["daily_capacity"] * US_PHASES[0]["period_days"], dtype=float)
    return Instance(
        dc_sites=dcs, demand_sites=regions, n_periods=1,
        operating_cost=[WAREHOUSE_SQFT * r for *_, r in US_DCS],
        capacity_unit_cost=np.full(I, VACCINE_UNIT_COST),
        shipping_unit_cost=ship[:, :, None],
        inventory_unit_cost=np.full((J, 1), VACCINE_HOLDING_COST),
        penalty_unit_cost=np.full((J, 1), VACCINE_PENALTY),
        dc_capacity_limit=M,
        temporal_budget=[M.sum()],
        initial_inventory=np.zeros(J), initial_backlog=np.zeros(J),
        dc_status=["preopened" if d[0] in US_PREOPENED else "candidate" for d in US_DCS],
        name="us-vaccine",
        metadata={"preopened": list(US_PREOPENED),
                  "phase_totals": {k: list(v) for k, v in US_PHASE_TOTALS.items()},
                  "phases": [dict(p) for p in US_PHASES]},
    )


def builtin_path(name: str) -> Path:
    return Path(str(resources.files("pandist") / "data" / name))


def load_builtin(name: str = "us_vaccine.json") -> Instance:
    return load_instance(builtin_path(name))


# -- experiments ------------------------------------------------------------

@dataclass
class ExperimentConfig:
    """Everything that determines an experiment's numbers.

    ``instance`` is a file path or ``builtin:<file>``. ``phases`` defaults to
    the instance metadata. ``scale`` multiplies phase totals and daily
    capacities (the desk fixture uses 1/1000). ``support_count`` limits the
    DRO support to the first in-sample scenarios.
    """

    instance: str = "builtin:us_vaccine.json"
    approaches: tuple = APPROACHES
    phase: str = "phase1"
    phases: Optional[list] = None
    scale: float = 1.0
    distribution: str = "uniform"
    half_width: float = 0.5
    in_count: int = 100
    in_seed: int = 1
    out_count: int = 1000
    out_seed: int = 2
    support_count: Optional[int] = None
    mean_slack: float = 0.5
    second_lo: float = 0.1
    second_hi: float = 2.0
    scarcity: float = 1.0
    dc_policy: str = "default"
    preopened: Optional[list] = None
    penalty_case: str = "i"
    penalty_constant: float = 100.0
    penalty_medians: Optional[list] = None
    elders: Optional[list] = None
    node_limit: int = 100_000
    gap_tol: float = 1e-6
    lp_method: str = "auto"

    def __post_init__(self):
        self.approaches = tuple(self.approaches)
        _validate(self.to_dict(), CONFIG_SCHEMA, "config")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["approaches"] = list(self.approaches)
        return {k: v for k, v in d.items() if v is not None}

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        _validate(data, CONFIG_SCHEMA, "config")
        return cls(**data)

    def replace(self, **changes) -> "ExperimentConfig":
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d.update({k: v for k, v in changes.items() if v is not None})
        return ExperimentConfig(**d)


def load_config(path) -> ExperimentConfig:
    return ExperimentConfig.from_dict(read_json(path))


def save_config(cfg: ExperimentConfig, path) -> None:
    write_json(cfg.to_dict(), path)


def resolve_instance(ref: str, base_dir=None) -> Instance:
    if ref.startswith("builtin:"):
        return load_builtin(ref.split(":", 1)[1])
    p = Path(ref)
    if base_dir is not None and not p.is_absolute():
        p = Path(base_dir) / p
    return load_instance(p)


def _phase_spec(config: ExperimentConfig, base: Instance) -> dict:
    phases = config.phases
    if phases is None:
        phases = (base.metadata or {}).get("phases")
    if not phases:
        raise InputError("no phase definitions in the config or the instance metadata")
    for p in phases:
        if p["name"] == config.phase:
            return p
    raise InputError(f"phase {config.phase!r} is not defined")


def _retime(arr, T, name):
    a = np.asarray(arr, dtype=float)
    if a.shape[-1] == T:
        return a
    if np.all(a == a[..., :1]):
        return np.repeat(a[..., :1], T, axis=-1)
    raise InputError(f"{name} varies over time and cannot be stretched to {T} periods")


def build_phase_instance(config: ExperimentConfig, base: Instance, phase_totals=None):
    """Instance and nominal moments for the configured phase.

    Per-period mean demand is the phase total over the phase's periods, each
    DC's limit is ``daily_capacity * period_days`` and the temporal budget is
    the sum of the limits (scarcity is applied later, in
    :func:`prepare_experiment`). With normal
    sampling and phase quantiles the mean/std come from the quantiles.
    """
    spec = _phase_spec(config, base)
    I, J = base.n_dcs, base.n_sites
    T = int(spec["n_periods"])
    days = int(spec.get("period_days", 14))
    std = None
    if "quantiles" in spec and phase_totals is None:
        q = spec["quantiles"]
        m, s = moments_from_quantiles(np.asarray(q["q025"]), np.asarray(q["median"]),
                                      np.asarray(q["q975"]))
        totals = m
        std = np.repeat((s / T)[:, None], T, axis=1) * config.scale
    else:
        totals = phase_totals
        if totals is None:
            totals = spec.get("totals")
        if totals is None:
            totals = (base.metadata or {}).get("phase_totals", {}).get(spec["name"])
        if totals is None:
            raise InputError(f"no demand totals for phase {spec['name']!r}")
    totals = np.asarray(totals, dtype=float) * config.scale
    if totals.shape != (J,):
        raise InputError(f"phase totals cover {totals.size} regions, instance has {J}")
    if np.any(totals < 0):
        raise InputError("phase totals must be nonnegative")
    mean = np.repeat((totals / T)[:, None], T, axis=1)
    if std is None:
        if config.distribution == "uniform":
            std = config.half_width * mean / math.sqrt(3.0)
        else:
            raise InputError("normal sampling needs phase quantiles")
    M = np.full(I, float(spec["daily_capacity"]) * days * config.scale)
    inst = base.replace(
        n_periods=T,
        capacity_unit_cost=base.capacity_unit_cost if base.capacity_unit_cost.ndim == 1
        else _retime(base.capacity_unit_cost, T, "capacity_unit_cost"),
        shipping_unit_cost=_retime(base.shipping_unit_cost, T, "shipping_unit_cost"),
        inventory_unit_cost=_retime(base.inventory_unit_cost, T, "inventory_unit_cost"),
        penalty_unit_cost=_retime(base.penalty_unit_cost, T, "penalty_unit_cost"),
        dc_capacity_limit=M,
        temporal_budget=np.full(T, M.sum()),
        dc_inventory_unit_cost=None if base.dc_inventory_unit_cost is None
        else _retime(base.dc_inventory_unit_cost, T, "dc_inventory_unit_cost"),
        name=f"{base.name}:{spec['name']}",
    )
    return inst, MomentEstimate.from_mean_std(mean, std)


@dataclass
class PreparedExperiment:
    instance: Instance
    nominal: MomentEstimate
    scenarios_in: ScenarioSet
    scenarios_out: ScenarioSet
    ambiguity: AmbiguitySpec


def _sample(config, nominal, count, seed):
    if config.distribution == "uniform":
        return sample_uniform_scenarios(nominal, config.half_width, count, seed)
    return sample_normal_scenarios(nominal, count, seed)


def prepare_experiment(config: ExperimentConfig, base_dir=None) -> PreparedExperiment:
    """Load, build the phase instance, apply knobs, sample, build the ambiguity set."""
    base = resolve_instance(config.instance, base_dir)
    inst, nominal = build_phase_instance(config, base)
    preopened = config.preopened
    if preopened is None:
        preopened = (base.metadata or {}).get("preopened", [])
    inst = apply_dc_policy(inst, config.dc_policy, preopened)
    if config.scarcity != 1.0:
        inst = apply_scarcity(inst, config.scarcity)
    J, T = inst.n_sites, inst.n_periods
    case = config.penalty_case
    cu = penalty_schedule(case, medians=config.penalty_medians, elders=config.elders,
                          n_sites=J, n_periods=T, constant=config.penalty_constant)
    if cu.shape != (J, T):
        raise InputError(f"penalty side data gives shape {cu.shape}, expected {(J, T)}")
    inst = inst.replace(penalty_unit_cost=cu)
    sc_in = _sample(config, nominal, config.in_count, config.in_seed)
    sc_out = _sample(config, nominal, config.out_count, config.out_seed)
    support = sc_in
    if config.support_count is not None and config.support_count < sc_in.n_scenarios:
        support = ScenarioSet.equiprobable(sc_in.demand[:config.support_count])
    amb = build_ambiguity_bounds(empirical_moments(support), config.mean_slack,
                                 config.second_lo, config.second_hi, support)
    return PreparedExperiment(inst, nominal, sc_in, sc_out, amb)


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    prepared: PreparedExperiment
    comparison: Comparison
    files: dict = field(default_factory=dict)


def _fmt(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def _csv_text(header, rows) -> str:
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(r[h]) for h in header])
    return buf.getvalue()


def breakdown_csv(result) -> str:
    """Breakdown table of a Comparison or of ``(name, PlanEvaluation)`` pairs."""
    pairs = [(r.approach, r.evaluation) for r in result.rows] if isinstance(result, Comparison) else result
    return _csv_text(BREAKDOWN_COLUMNS, [ev.summary_row(name) for name, ev in pairs])


def comparison_csv(comp: Comparison) -> str:
    header = ("approach", "total", "pct_over_best", "unmet_mean", "open_dcs", "milp_status",
              "in_sample_objective")
    rows = [{"approach": r.approach, "total": r.total, "pct_over_best": r.pct_over_best,
             "unmet_mean": r.evaluation.unmet_mean, "open_dcs": r.plan.open_dcs,
             "milp_status": r.plan.solution.status, "in_sample_objective": r.plan.objective}
            for r in comp.rows]
    return _csv_text(header, rows)


def regional_csv(comp: Comparison, inst: Instance) -> str:
    rows = []
    for r in comp.rows:
        for j, s in enumerate(inst.demand_sites):
            rows.append({"approach": r.approach, "region": s.id,
                         "unmet_pct": r.evaluation.regional_unmet_pct[j]})
    return _csv_text(("approach", "region", "unmet_pct"), rows)


def plans_csv(comp: Comparison, inst: Instance) -> str:
    T = inst.n_periods
    header = ("approach", "dc", "open") + tuple(f"h_t{t + 1}" for t in range(T))
    rows = []
    for r in comp.rows:
        for i, s in enumerate(inst.dc_sites):
            row = {"approach": r.approach, "dc": s.id, "open": int(r.plan.x[i])}
            row.update({f"h_t{t + 1}": r.plan.h[i, t] for t in range(T)})
            rows.append(row)
    return _csv_text(header, rows)


def format_money(v: float) -> str:
    """Display rounding in $K/$M/$B."""
    a = abs(v)
    for div, suf in ((1e9, "B"), (1e6, "M"), (1e3, "K")):
        if a >= div:
            return f"${v / div:.0f}{suf}" if a / div >= 100 else f"${v / div:.3g}{suf}"
    return f"${v:.2f}"


def run_experiment(config: ExperimentConfig, out_dir=None, base_dir=None) -> ExperimentResult:
    """load -> phase build -> sample -> solve each approach -> evaluate -> CSVs."""
    stage = "prepare"
    try:
        prep = prepare_experiment(config, base_dir)
        stage = "solve/evaluate"
        comp = compare_approaches(prep.instance, prep.scenarios_in, prep.scenarios_out,
                                  prep.ambiguity, config.approaches, mean_demand=prep.nominal.mean,
                                  node_limit=config.node_limit, gap_tol=config.gap_tol,
                                  lp_method=config.lp_method)
    except InputError as e:
        raise InputError(f"[{stage}] {e}") from e
    res = ExperimentResult(config, prep, comp)
    for r in comp.rows:
        log.info("%s: total %s, unmet %.1f, %d DCs open", r.approach,
                 format_money(r.total), r.evaluation.unmet_mean, r.plan.open_dcs)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        texts = {"breakdown.csv": breakdown_csv(comp), "comparison.csv": comparison_csv(comp),
                 "regional.csv": regional_csv(comp, prep.instance),
                 "plans.csv": plans_csv(comp, prep.instance)}
        for name, text in texts.items():
            (out / name).write_text(text, encoding="utf-8")
            res.files[name] = out / name
    return res
