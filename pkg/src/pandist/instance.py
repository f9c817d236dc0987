"""Planning instance data: index sets, cost and capacity parameters, scenarios.

Arrays use the index order (dc, demand site, period[, type]) throughout. All
period indices are zero-based in code; period 0 is the first planning period
and the initial inventory/backlog values sit "before" it.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

PREOPENED = "preopened"
CANDIDATE = "candidate"
FORBIDDEN = "forbidden"
DC_STATUSES = (PREOPENED, CANDIDATE, FORBIDDEN)


class InputError(ValueError):
    """Rejected input data (bad shape, sign, ordering or missing fields)."""


@dataclass(frozen=True)
class Site:
    id: str
    label: str = ""
    lat: Optional[float] = None
    lon: Optional[float] = None

    @property
    def coords(self):
        if self.lat is None or self.lon is None:
            return None
        return (self.lat, self.lon)


def _frozen(a, dtype=float):
    arr = np.array(a, dtype=dtype)
    arr.setflags(write=False)
    return arr


def _sites(items) -> tuple:
    out = []
    for s in items:
        if isinstance(s, Site):
            out.append(s)
        elif isinstance(s, str):
            out.append(Site(s, s))
        else:
            out.append(Site(**s))
    return tuple(out)


@dataclass(frozen=True, eq=False)
class Instance:
    """Single-resource facility-location-and-distribution instance.

    ``capacity_unit_cost`` may be per DC (shape ``(I,)``) or per DC and period
    (``(I, T)``). ``dc_inventory_unit_cost``/``initial_dc_inventory`` enable
    DC-side inventory; ``lead_time`` enables shipping delays. When those are
    ``None`` the base model applies (no DC inventory, zero lead time).
    ``metadata`` carries free-form side data (phase totals, preopened sites)
    and never enters a formulation.
    """

    dc_sites: tuple
    demand_sites: tuple
    n_periods: int
    operating_cost: np.ndarray
    capacity_unit_cost: np.ndarray
    shipping_unit_cost: np.ndarray
    inventory_unit_cost: np.ndarray
    penalty_unit_cost: np.ndarray
    dc_capacity_limit: np.ndarray
    temporal_budget: np.ndarray
    initial_inventory: np.ndarray
    initial_backlog: np.ndarray
    dc_status: tuple
    dc_inventory_unit_cost: Optional[np.ndarray] = None
    initial_dc_inventory: Optional[np.ndarray] = None
    lead_time: Optional[np.ndarray] = None
    name: str = ""
    metadata: Optional[dict] = None

    def __post_init__(self):
        set_ = object.__setattr__
        set_(self, "dc_sites", _sites(self.dc_sites))
        set_(self, "demand_sites", _sites(self.demand_sites))
        set_(self, "n_periods", int(self.n_periods))
        for f in ("operating_cost", "capacity_unit_cost", "shipping_unit_cost",
                  "inventory_unit_cost", "penalty_unit_cost", "dc_capacity_limit",
                  "temporal_budget", "initial_inventory", "initial_backlog"):
            set_(self, f, _frozen(getattr(self, f)))
        for f in ("dc_inventory_unit_cost", "initial_dc_inventory"):
            if getattr(self, f) is not None:
                set_(self, f, _frozen(getattr(self, f)))
        if self.lead_time is not None:
            set_(self, "lead_time", _frozen(self.lead_time, dtype=float))
        set_(self, "dc_status", tuple(self.dc_status))

    @property
    def n_dcs(self) -> int:
        return len(self.dc_sites)

    @property
    def n_sites(self) -> int:
        return len(self.demand_sites)

    @property
    def shape(self):
        return self.n_dcs, self.n_sites, self.n_periods

    def capacity_cost_matrix(self) -> np.ndarray:
        """Capacity unit cost broadcast to ``(I, T)``."""
        c = self.capacity_unit_cost
        if c.ndim == 1:
            return np.repeat(c[:, None], self.n_periods, axis=1)
        return np.array(c)

    def lead_times(self) -> np.ndarray:
        if self.lead_time is None:
            return np.zeros((self.n_dcs, self.n_sites), dtype=int)
        return self.lead_time.astype(int)

    @property
    def has_dc_inventory(self) -> bool:
        return self.dc_inventory_unit_cost is not None

    def x_bounds(self):
        """Lower/upper bounds of the open flags implied by ``dc_status``."""
        lo = np.array([1.0 if s == PREOPENED else 0.0 for s in self.dc_status])
        hi = np.array([0.0 if s == FORBIDDEN else 1.0 for s in self.dc_status])
        return lo, hi

    def replace(self, **changes) -> "Instance":
        return replace(self, **changes)


@dataclass(frozen=True, eq=False)
class TypedInstance:
    """Instance with several resource types sharing the temporal budget.

    Type-indexed arrays carry the type as their last axis: operating cost and
    capacity cost ``(I, L)``, shipping ``(I, J, T, L)``, inventory and penalty
    ``(J, T, L)``, capacity limits ``(I, L)``, initial inventory and backlog
    ``(J, L)`` and DC status ``(I, L)``.
    """

    dc_sites: tuple
    demand_sites: tuple
    n_periods: int
    resource_types: tuple
    operating_cost: np.ndarray
    capacity_unit_cost: np.ndarray
    shipping_unit_cost: np.ndarray
    inventory_unit_cost: np.ndarray
    penalty_unit_cost: np.ndarray
    dc_capacity_limit: np.ndarray
    temporal_budget: np.ndarray
    initial_inventory: np.ndarray
    initial_backlog: np.ndarray
    dc_status: tuple
    name: str = ""

    def __post_init__(self):
        set_ = object.__setattr__
        set_(self, "dc_sites", _sites(self.dc_sites))
        set_(self, "demand_sites", _sites(self.demand_sites))
        set_(self, "n_periods", int(self.n_periods))
        set_(self, "resource_types", tuple(self.resource_types))
        for f in ("operating_cost", "capacity_unit_cost", "shipping_unit_cost",
                  "inventory_unit_cost", "penalty_unit_cost", "dc_capacity_limit",
                  "temporal_budget", "initial_inventory", "initial_backlog"):
            set_(self, f, _frozen(getattr(self, f)))
        set_(self, "dc_status", tuple(tuple(row) for row in self.dc_status))

    @property
    def n_dcs(self) -> int:
        return len(self.dc_sites)

    @property
    def n_sites(self) -> int:
        return len(self.demand_sites)

    @property
    def n_types(self) -> int:
        return len(self.resource_types)

    def x_bounds(self):
        lo = np.array([[1.0 if s == PREOPENED else 0.0 for s in row] for row in self.dc_status])
        hi = np.array([[0.0 if s == FORBIDDEN else 1.0 for s in row] for row in self.dc_status])
        return lo, hi

    @classmethod
    def from_instance(cls, inst: Instance) -> "TypedInstance":
        """Single-type view of a base instance."""
        if inst.capacity_unit_cost.ndim != 1:
            raise InputError("typed instances need time-constant capacity costs")
        return cls(
            dc_sites=inst.dc_sites, demand_sites=inst.demand_sites,
            n_periods=inst.n_periods, resource_types=("default",),
            operating_cost=inst.operating_cost[:, None],
            capacity_unit_cost=inst.capacity_unit_cost[:, None],
            shipping_unit_cost=inst.shipping_unit_cost[..., None],
            inventory_unit_cost=inst.inventory_unit_cost[..., None],
            penalty_unit_cost=inst.penalty_unit_cost[..., None],
            dc_capacity_limit=inst.dc_capacity_limit[:, None],
            temporal_budget=inst.temporal_budget,
            initial_inventory=inst.initial_inventory[:, None],
            initial_backlog=inst.initial_backlog[:, None],
            dc_status=[(s,) for s in inst.dc_status],
            name=inst.name,
        )


@dataclass(frozen=True, eq=False)
class ScenarioSet:
    """Finite demand realizations ``demand[w, j, t]`` with probabilities."""

    demand: np.ndarray
    probabilities: np.ndarray

    def __post_init__(self):
        d = np.array(self.demand, dtype=float)
        if d.ndim == 2:
            d = d[None]
        p = np.array(self.probabilities, dtype=float).reshape(-1)
        if d.ndim != 3:
            raise InputError("demand must have shape (scenarios, sites, periods)")
        if d.shape[0] < 1:
            raise InputError("at least one scenario is required")
        if p.shape[0] != d.shape[0]:
            raise InputError(
                f"{p.shape[0]} probabilities for {d.shape[0]} scenarios")
        if not np.all(np.isfinite(d)) or np.any(d < 0):
            raise InputError("demand must be finite and nonnegative")
        if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-9:
            raise InputError("probabilities must be nonnegative and sum to 1")
        object.__setattr__(self, "demand", _frozen(d))
        object.__setattr__(self, "probabilities", _frozen(p))

    @classmethod
    def equiprobable(cls, demand) -> "ScenarioSet":
        d = np.asarray(demand, dtype=float)
        if d.ndim == 2:
            d = d[None]
        n = d.shape[0]
        return cls(d, np.full(n, 1.0 / n))

    @classmethod
    def point_mass(cls, demand) -> "ScenarioSet":
        return cls(np.asarray(demand, dtype=float)[None], np.ones(1))

    @property
    def n_scenarios(self) -> int:
        return self.demand.shape[0]

    def __len__(self):
        return self.n_scenarios


@dataclass
class ValidationReport:
    violations: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self):
        return self.ok

    def __iter__(self):
        return iter(self.violations)

    def __len__(self):
        return len(self.violations)


@dataclass(frozen=True)
class Violation:
    field: str
    message: str
    index: Optional[tuple] = None

    def __str__(self):
        where = f" at {self.index}" if self.index is not None else ""
        return f"{self.field}{where}: {self.message}"


def _check_shape(report, name, arr, shapes: Sequence[tuple]):
    if arr.shape not in shapes:
        want = " or ".join(str(s) for s in shapes)
        report.violations.append(
            Violation(name, f"dimension mismatch: shape {arr.shape}, expected {want}"))
        return False
    return True


def _check_sign(report, name, arr, labels):
    bad = np.argwhere(~(arr >= 0))
    for idx in bad:
        coords = tuple(f"{lab}={int(k) + 1}" for lab, k in zip(labels, idx))
        report.violations.append(
            Violation(name, f"must be finite and >= 0, got {arr[tuple(idx)]}",
                      "(" + ",".join(coords) + ")"))


def validate_instance(instance: Instance) -> ValidationReport:
    """Collect every invariant violation of ``instance``; never raises.

    Index coordinates in messages are one-based, matching how sites and
    periods are numbered in reports.
    """
    r = ValidationReport()
    I, J, T = instance.n_dcs, instance.n_sites, instance.n_periods
    if I < 1:
        r.violations.append(Violation("dc_sites", "must be nonempty"))
    if J < 1:
        r.violations.append(Violation("demand_sites", "must be nonempty"))
    if T < 1:
        r.violations.append(Violation("periods", "must be nonempty"))
    ids = [s.id for s in instance.dc_sites]
    if len(set(ids)) != len(ids):
        r.violations.append(Violation("dc_sites", "duplicate identifiers"))
    ids = [s.id for s in instance.demand_sites]
    if len(set(ids)) != len(ids):
        r.violations.append(Violation("demand_sites", "duplicate identifiers"))

    specs = [
        ("operating_cost", instance.operating_cost, [(I,)], ("i",)),
        ("capacity_unit_cost", instance.capacity_unit_cost, [(I,), (I, T)], ("i", "t")),
        ("shipping_unit_cost", instance.shipping_unit_cost, [(I, J, T)], ("i", "j", "t")),
        ("inventory_unit_cost", instance.inventory_unit_cost, [(J, T)], ("j", "t")),
        ("penalty_unit_cost", instance.penalty_unit_cost, [(J, T)], ("j", "t")),
        ("dc_capacity_limit", instance.dc_capacity_limit, [(I,)], ("i",)),
        ("temporal_budget", instance.temporal_budget, [(T,)], ("t",)),
        ("initial_inventory", instance.initial_inventory, [(J,)], ("j",)),
        ("initial_backlog", instance.initial_backlog, [(J,)], ("j",)),
    ]
    if instance.dc_inventory_unit_cost is not None:
        specs.append(("dc_inventory_unit_cost", instance.dc_inventory_unit_cost,
                      [(I, T)], ("i", "t")))
    if instance.initial_dc_inventory is not None:
        specs.append(("initial_dc_inventory", instance.initial_dc_inventory,
                      [(I,)], ("i",)))
    if instance.lead_time is not None:
        specs.append(("lead_time", instance.lead_time, [(I, J)], ("i", "j")))
    for name, arr, shapes, labels in specs:
        if _check_shape(r, name, arr, shapes):
            _check_sign(r, name, arr, labels)
    if instance.lead_time is not None and instance.lead_time.shape == (I, J):
        frac = np.argwhere(instance.lead_time != np.round(instance.lead_time))
        for idx in frac:
            r.violations.append(Violation(
                "lead_time", "must be an integer number of periods",
                f"(i={idx[0] + 1},j={idx[1] + 1})"))
    if (instance.dc_inventory_unit_cost is None) != (instance.initial_dc_inventory is None):
        r.violations.append(Violation(
            "dc_inventory_unit_cost",
            "DC inventory needs both dc_inventory_unit_cost and initial_dc_inventory"))

    if len(instance.dc_status) != I:
        r.violations.append(Violation(
            "dc_status", f"dimension mismatch: {len(instance.dc_status)} entries, expected {I}"))
    for i, s in enumerate(instance.dc_status):
        if s not in DC_STATUSES:
            r.violations.append(Violation("dc_status", f"unknown status {s!r}", f"(i={i + 1})"))
    return r


def validate_typed_instance(inst: TypedInstance) -> ValidationReport:
    r = ValidationReport()
    I, J, T, L = inst.n_dcs, inst.n_sites, inst.n_periods, inst.n_types
    for name, n in (("dc_sites", I), ("demand_sites", J), ("periods", T),
                    ("resource_types", L)):
        if n < 1:
            r.violations.append(Violation(name, "must be nonempty"))
    specs = [
        ("operating_cost", inst.operating_cost, (I, L), ("i", "l")),
        ("capacity_unit_cost", inst.capacity_unit_cost, (I, L), ("i", "l")),
        ("shipping_unit_cost", inst.shipping_unit_cost, (I, J, T, L), ("i", "j", "t", "l")),
        ("inventory_unit_cost", inst.inventory_unit_cost, (J, T, L), ("j", "t", "l")),
        ("penalty_unit_cost", inst.penalty_unit_cost, (J, T, L), ("j", "t", "l")),
        ("dc_capacity_limit", inst.dc_capacity_limit, (I, L), ("i", "l")),
        ("temporal_budget", inst.temporal_budget, (T,), ("t",)),
        ("initial_inventory", inst.initial_inventory, (J, L), ("j", "l")),
        ("initial_backlog", inst.initial_backlog, (J, L), ("j", "l")),
    ]
    for name, arr, shape, labels in specs:
        if _check_shape(r, name, arr, [shape]):
            _check_sign(r, name, arr, labels)
    if len(inst.dc_status) != I or any(len(row) != L for row in inst.dc_status):
        r.violations.append(Violation("dc_status", f"dimension mismatch, expected ({I}, {L})"))
    for row in inst.dc_status:
        for s in row:
            if s not in DC_STATUSES:
                r.violations.append(Violation("dc_status", f"unknown status {s!r}"))
    return r


def check_scenarios(instance, scenarios: ScenarioSet) -> None:
    """Raise InputError when scenario dimensions do not match the instance."""
    J, T = instance.n_sites, instance.n_periods
    if scenarios.demand.shape[1:] != (J, T):
        raise InputError(
            f"scenario demand has shape {scenarios.demand.shape[1:]}, instance needs {(J, T)}")
