"""Out-of-sample evaluation of first-stage plans and approach comparison."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .dro_verify import second_stage_cost
from .formulations import (build_deterministic, build_dro_milp, build_extensive_smip,
                           dro_worst_case_part)
from .instance import CANDIDATE, FORBIDDEN, PREOPENED, Instance, InputError, ScenarioSet, check_scenarios
from .milp import MILP_OPTIMAL, MilpSolution, SolverLimitError, solve_milp
from .model import ModelIR
from .scenarios import AmbiguitySpec, MomentEstimate

log = logging.getLogger(__name__)

PERCENTILES = (75, 80, 85, 90, 95)
APPROACHES = ("dt", "sp", "dro")
COST_FIELDS = ("operating", "capacity", "shipping", "inventory", "penalty")


@dataclass
class CostBreakdown:
    operating: float = 0.0
    capacity: float = 0.0
    shipping: float = 0.0
    inventory: float = 0.0
    penalty: float = 0.0

    @property
    def total(self) -> float:
        return self.operating + self.capacity + self.shipping + self.inventory + self.penalty

    def as_dict(self) -> dict:
        d = {k: getattr(self, k) for k in COST_FIELDS}
        d["total"] = self.total
        return d


@dataclass
class PlanEvaluation:
    """Per-scenario recourse outcomes of a fixed plan and their aggregates.

    ``unmet`` holds the terminal backlog ``sum_j u[j, T]`` per scenario; the
    summary statistics are probability weighted. ``backlog_periods`` is the
    per-scenario sum of backlog over all sites and periods.
    """

    recourse: np.ndarray
    costs: CostBreakdown
    unmet: np.ndarray
    backlog_periods: np.ndarray
    unmet_mean: float
    unmet_std: float
    unmet_percentiles: dict
    regional_unmet_pct: np.ndarray
    probabilities: np.ndarray
    mean_shipments: np.ndarray = field(repr=False, default=None)

    @property
    def total(self) -> float:
        return self.costs.total

    def summary_row(self, approach: str) -> dict:
        row = {"approach": approach}
        row.update(self.costs.as_dict())
        row["unmet_mean"] = self.unmet_mean
        row["unmet_std"] = self.unmet_std
        for q in PERCENTILES:
            row[f"unmet_p{q}"] = self.unmet_percentiles[q]
        return row


@dataclass
class FirstStagePlan:
    approach: str
    x: np.ndarray
    h: np.ndarray
    objective: float
    solution: MilpSolution
    model: ModelIR

    @property
    def open_dcs(self) -> int:
        return int(np.round(self.x).sum())


def check_first_stage(instance: Instance, x, h, tol: float = 1e-6) -> None:
    """Raise InputError naming the first violated first-stage constraint."""
    I, J, T = instance.shape
    x = np.asarray(x, dtype=float)
    h = np.asarray(h, dtype=float)
    if x.shape != (I,) or h.shape != (I, T):
        raise InputError(f"plan shapes x{x.shape}, h{h.shape}; expected ({I},), ({I}, {T})")
    if np.any(np.abs(x - np.round(x)) > tol) or np.any((x < -tol) | (x > 1 + tol)):
        raise InputError("open flags must be binary")
    xlo, xhi = instance.x_bounds()
    for i in range(I):
        if x[i] < xlo[i] - tol:
            raise InputError(f"dc_status: preopened DC {instance.dc_sites[i].id} is closed")
        if x[i] > xhi[i] + tol:
            raise InputError(f"dc_status: forbidden DC {instance.dc_sites[i].id} is open")
    if np.any(h < -tol):
        raise InputError("capacities must be nonnegative")
    over = h - instance.dc_capacity_limit[:, None] * x[:, None]
    if over.max(initial=-np.inf) > tol:
        i, t = np.unravel_index(np.argmax(over), over.shape)
        raise InputError(f"capacity_link violated at (i={i + 1},t={t + 1}): "
                         f"h={h[i, t]} > M*x={instance.dc_capacity_limit[i] * x[i]}")
    excess = h.sum(axis=0) - instance.temporal_budget
    if excess.max(initial=-np.inf) > tol:
        t = int(np.argmax(excess))
        raise InputError(f"budget violated at (t={t + 1}): {h[:, t].sum()} > {instance.temporal_budget[t]}")


def _weighted_percentile(values, weights, q):
    if np.allclose(weights, weights[0]):
        return float(np.percentile(values, q))
    return float(np.percentile(values, q, weights=weights, method="inverted_cdf"))


def out_of_sample_evaluate(instance: Instance, x, h, scenarios: ScenarioSet,
                           method: str = "auto") -> PlanEvaluation:
    """Evaluate plan ``(x, h)`` by re-solving the recourse LP in every scenario."""
    check_first_stage(instance, x, h)
    check_scenarios(instance, scenarios)
    x = np.round(np.asarray(x, dtype=float))
    h = np.asarray(h, dtype=float)
    h = np.maximum(h, 0.0)
    I, J, T = instance.shape
    W = scenarios.n_scenarios
    p = scenarios.probabilities
    costs = CostBreakdown(
        operating=float(instance.operating_cost @ x),
        capacity=float(np.sum(instance.capacity_cost_matrix() * h)),
    )
    recourse = np.zeros(W)
    unmet = np.zeros(W)
    backlog = np.zeros(W)
    terminal = np.zeros((W, J))
    ship_mean = np.zeros((I, J, T))
    # fixed summation order keeps results reproducible
    for w in range(W):
        res = second_stage_cost(instance, h, scenarios.demand[w], method=method)
        s, Iv, u = np.maximum(res.s, 0), np.maximum(res.I, 0), np.maximum(res.u, 0)
        recourse[w] = res.objective
        costs.shipping += p[w] * float(np.sum(instance.shipping_unit_cost * s))
        costs.inventory += p[w] * float(np.sum(instance.inventory_unit_cost * Iv))
        costs.penalty += p[w] * float(np.sum(instance.penalty_unit_cost * u))
        terminal[w] = u[:, -1]
        unmet[w] = u[:, -1].sum()
        backlog[w] = u.sum()
        ship_mean += p[w] * s
    mean = float(p @ unmet)
    std = float(np.sqrt(max(p @ (unmet - mean) ** 2, 0.0)))
    pct = {q: _weighted_percentile(unmet, p, q) for q in PERCENTILES}
    exp_demand = np.tensordot(p, scenarios.demand, axes=1).sum(axis=1) + instance.initial_backlog
    exp_terminal = p @ terminal
    with np.errstate(divide="ignore", invalid="ignore"):
        regional = np.where(exp_demand > 0, 100.0 * exp_terminal / exp_demand, 0.0)
    regional = np.clip(regional, 0.0, 100.0)
    return PlanEvaluation(recourse, costs, unmet, backlog, mean, std, pct, regional, p.copy(),
                          ship_mean)


def apply_scarcity(instance: Instance, factor: float) -> Instance:
    """Scale the temporal production budget by ``factor`` in (0, 1]."""
    if not 0.0 < factor <= 1.0:
        raise InputError(f"scarcity factor must lie in (0, 1], got {factor}")
    return instance.replace(temporal_budget=instance.temporal_budget * factor)


DC_POLICIES = ("default", "best_case", "most_restrictive")


def apply_dc_policy(instance: Instance, policy: str, preopened: Sequence[str] = ()) -> Instance:
    """Set DC statuses for the default, best-case or most-restrictive setting.

    ``default`` keeps the listed DCs open and lets the others be chosen;
    ``best_case`` makes every site a free choice; ``most_restrictive`` keeps
    the listed DCs open and forbids all others.
    """
    policy = policy.replace("-", "_")
    if policy not in DC_POLICIES:
        raise InputError(f"unknown DC policy {policy!r}")
    ids = [s.id for s in instance.dc_sites]
    unknown = [p for p in preopened if p not in ids]
    if unknown:
        raise InputError(f"unknown DC sites: {', '.join(unknown)}")
    pre = set(preopened)
    if policy == "best_case":
        status = [CANDIDATE] * len(ids)
    elif policy == "default":
        status = [PREOPENED if i in pre else CANDIDATE for i in ids]
    else:
        status = [PREOPENED if i in pre else FORBIDDEN for i in ids]
    return instance.replace(dc_status=tuple(status))


def _plan_from(model, sol: MilpSolution, approach, instance) -> FirstStagePlan:
    if sol.x is None:
        raise SolverLimitError(f"{approach}: no feasible plan ({sol.status})")
    if sol.status != MILP_OPTIMAL:
        log.warning("%s: branch-and-bound stopped with status %s (gap %.3g)",
                    approach, sol.status, sol.gap)
    x = np.round(model.value(sol.x, "x"))
    # clip solver noise so the plan satisfies the first-stage rows exactly
    h = np.clip(model.value(sol.x, "h"), 0.0, instance.dc_capacity_limit[:, None] * x[:, None])
    over = h.sum(axis=0) - instance.temporal_budget
    for t in np.flatnonzero(over > 0):
        h[:, t] *= instance.temporal_budget[t] / h[:, t].sum()
    return FirstStagePlan(approach, x, h, sol.objective, sol, model)


def solve_approach(instance: Instance, approach: str, scenarios: Optional[ScenarioSet] = None,
                   ambiguity: Optional[AmbiguitySpec] = None, mean_demand=None,
                   node_limit: int = 100_000, gap_tol: float = 1e-6,
                   lp_method: str = "auto") -> FirstStagePlan:
    """Build and solve the DT, SP or DRO model; return its first-stage plan."""
    approach = approach.lower()
    if approach == "dt":
        if mean_demand is None:
            if ambiguity is not None:
                mean_demand = ambiguity.moments.mean
            elif scenarios is not None:
                mean_demand = np.tensordot(scenarios.probabilities, scenarios.demand, axes=1)
            else:
                raise InputError("DT needs mean demand, scenarios or an ambiguity set")
        model = build_deterministic(instance, mean_demand)
    elif approach == "sp":
        if scenarios is None:
            raise InputError("SP needs in-sample scenarios")
        model = build_extensive_smip(instance, scenarios)
    elif approach == "dro":
        if ambiguity is None:
            raise InputError("DRO needs an ambiguity set")
        model = build_dro_milp(instance, ambiguity)
    else:
        raise InputError(f"unknown approach {approach!r}")
    sol = solve_milp(model, node_limit=node_limit, gap_tol=gap_tol, lp_method=lp_method)
    return _plan_from(model, sol, approach, instance)


@dataclass
class ComparisonRow:
    approach: str
    plan: FirstStagePlan
    evaluation: PlanEvaluation
    pct_over_best: float = 0.0

    @property
    def total(self):
        return self.evaluation.total


@dataclass
class Comparison:
    rows: list

    def __getitem__(self, approach: str) -> ComparisonRow:
        for r in self.rows:
            if r.approach == approach:
                return r
        raise KeyError(approach)

    def table(self) -> list:
        out = []
        for r in self.rows:
            d = r.evaluation.summary_row(r.approach)
            d["pct_over_best"] = r.pct_over_best
            d["open_dcs"] = r.plan.open_dcs
            out.append(d)
        return out


def compare_approaches(instance: Instance, scenarios_in: ScenarioSet, scenarios_out: ScenarioSet,
                       ambiguity: AmbiguitySpec, approaches: Sequence[str] = APPROACHES,
                       mean_demand=None, node_limit: int = 100_000, gap_tol: float = 1e-6,
                       lp_method: str = "auto") -> Comparison:
    """Solve each approach in-sample and evaluate every plan out-of-sample.

    DT uses ``mean_demand`` when given, otherwise the ambiguity set's mean.
    ``pct_over_best`` is the percentage by which a row's out-of-sample total
    exceeds the smallest total in the table.
    """
    rows = []
    for a in approaches:
        plan = solve_approach(instance, a, scenarios_in, ambiguity, mean_demand,
                              node_limit=node_limit, gap_tol=gap_tol, lp_method=lp_method)
        ev = out_of_sample_evaluate(instance, plan.x, plan.h, scenarios_out, method=lp_method)
        rows.append(ComparisonRow(a, plan, ev))
    best = min(r.total for r in rows)
    for r in rows:
        r.pct_over_best = 0.0 if r.total <= best else 100.0 * (r.total - best) / abs(best) if best else 0.0
    return Comparison(rows)


def check_solution_invariants(model: ModelIR, x, tol: float = 1e-6) -> list:
    """Feasibility and complementarity problems of a solved model.

    Every row residual must be within ``tol * (1 + |rhs|)`` and every bound
    within ``tol``. Where a model has inventory ``I`` and backlog ``u`` blocks,
    both may be positive at once only if neither carries objective weight.
    The DRO model prices recourse through its epigraph rows instead of the
    objective, so only its feasibility is checked. Returns readable problem
    descriptions (empty when all checks pass).
    """
    problems = []
    x = np.asarray(x, dtype=float)
    res = model.residuals(x) / (1.0 + np.abs(model.rhs))
    if res.size and res.max() > tol:
        r = int(np.argmax(res))
        problems.append(f"row {model.row_names[r]} violated by {res[r]:.3g} (scaled)")
    if model.bound_residual(x) > tol:
        problems.append(f"bound violated by {model.bound_residual(x):.3g}")
    if "I" in model.blocks and "u" in model.blocks:
        Ic, uc = model.blocks["I"], model.blocks["u"]
        priced = (model.obj[Ic] + model.obj[uc]) > 0
        both = np.where(priced, np.minimum(x[Ic], x[uc]), 0.0)
        if both.size and both.max() > tol:
            k = np.unravel_index(np.argmax(both), both.shape)
            problems.append(f"inventory and backlog both positive at {tuple(int(v) for v in k)}: "
                            f"{both.max():.3g}")
    return problems
