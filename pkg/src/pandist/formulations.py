"""Model builders: deterministic, stochastic extensive form, extensions, DRO.

Every builder returns a :class:`~pandist.model.ModelIR` whose columns come in
canonical order: open flags ``x``, capacities ``h``, then (where present)
the worst-case dual multipliers, then one recourse block per scenario or
support point (scenario-major).
"""
from __future__ import annotations

import numpy as np

from .instance import (Instance, InputError, ScenarioSet, TypedInstance,
                       check_scenarios, validate_instance, validate_typed_instance)
from .model import EQ, GE, LE, BuildError, ModelBuilder, ModelIR
from .scenarios import AmbiguityError, AmbiguitySpec, MomentEstimate


def _require_valid(instance):
    if isinstance(instance, TypedInstance):
        report = validate_typed_instance(instance)
    else:
        report = validate_instance(instance)
    if not report.ok:
        raise BuildError("invalid instance: " + "; ".join(str(v) for v in report.violations[:5]))


def _first_stage(b: ModelBuilder, inst: Instance):
    I, J, T = inst.shape
    xlo, xhi = inst.x_bounds()
    x = b.add_vars("x", (I,), lb=xlo, ub=xhi, cost=inst.operating_cost, integer=True)
    h = b.add_vars("h", (I, T), cost=inst.capacity_cost_matrix())
    for i in range(I):
        for t in range(T):
            # big-M is the DC's own capacity limit
            b.add_row("capacity_link", (i, t), [h[i, t], x[i]],
                      [1.0, -inst.dc_capacity_limit[i]], LE, 0.0)
    for t in range(T):
        b.add_row("budget", (t,), h[:, t], 1.0, LE, inst.temporal_budget[t])
    b.expect(rows={"capacity_link": I * T, "budget": T}, vars={"x": I, "h": I * T})
    return x, h


def _recourse(b: ModelBuilder, inst: Instance, xi, h, tag, lead=None, dc_inventory=False):
    """Second-stage variables and rows for one demand realization ``xi[j, t]``.

    Returns the variable index arrays and their objective coefficients.
    """
    I, J, T = inst.shape
    s = b.add_vars(None, (I, J, T), name="s", index_prefix=tag)
    ID = b.add_vars(None, (I, T), name="ID", index_prefix=tag) if dc_inventory else None
    Iv = b.add_vars(None, (J, T), name="I", index_prefix=tag)
    u = b.add_vars(None, (J, T), name="u", index_prefix=tag)
    for i in range(I):
        for t in range(T):
            if dc_inventory:
                cols = list(s[i, :, t]) + [ID[i, t], h[i, t]]
                coefs = [1.0] * J + [1.0, -1.0]
                rhs = inst.initial_dc_inventory[i] if t == 0 else 0.0
                if t > 0:
                    cols.append(ID[i, t - 1])
                    coefs.append(-1.0)
                b.add_row("ship", tag + (i, t), cols, coefs, EQ, rhs)
            else:
                b.add_row("ship", tag + (i, t), list(s[i, :, t]) + [h[i, t]],
                          [1.0] * J + [-1.0], LE, 0.0)
    for j in range(J):
        for t in range(T):
            cols, coefs = [], []
            for i in range(I):
                send = t - (0 if lead is None else int(lead[i, j]))
                if send >= 0:
                    cols.append(s[i, j, send])
                    coefs.append(1.0)
            cols += [u[j, t], Iv[j, t]]
            coefs += [1.0, -1.0]
            rhs = xi[j, t]
            if t > 0:
                cols += [Iv[j, t - 1], u[j, t - 1]]
                coefs += [1.0, -1.0]
            else:
                rhs += inst.initial_backlog[j] - inst.initial_inventory[j]
            b.add_row("flow", tag + (j, t), cols, coefs, EQ, rhs)
    blocks = {"s": s, "I": Iv, "u": u}
    costs = {"s": inst.shipping_unit_cost, "I": inst.inventory_unit_cost,
             "u": inst.penalty_unit_cost}
    if dc_inventory:
        blocks["ID"] = ID
        costs["ID"] = inst.dc_inventory_unit_cost
    return blocks, costs


def _register_stacked(b: ModelBuilder, pieces: list, suffix: str = ""):
    for key in pieces[0]:
        b.register(key + suffix, np.stack([p[key] for p in pieces]))


def _scenario_model(name, instance, scenarios, lead=None, dc_inventory=False) -> ModelIR:
    _require_valid(instance)
    try:
        check_scenarios(instance, scenarios)
    except InputError as e:
        raise BuildError(str(e)) from None
    I, J, T = instance.shape
    W = scenarios.n_scenarios
    b = ModelBuilder(name)
    x, h = _first_stage(b, instance)
    pieces = []
    for w in range(W):
        blocks, costs = _recourse(b, instance, scenarios.demand[w], h, (w,),
                                  lead=lead, dc_inventory=dc_inventory)
        p = scenarios.probabilities[w]
        for key, idx in blocks.items():
            b.add_cost(idx, p * costs[key])
        pieces.append(blocks)
    _register_stacked(b, pieces)
    n_rec = I * J * T + 2 * J * T + (I * T if dc_inventory else 0)
    b.expect(rows={"ship": W * I * T, "flow": W * J * T},
             vars={"s": W * I * J * T, "I": W * J * T, "u": W * J * T})
    model = b.build()
    assert model.n_vars == I + I * T + W * n_rec
    return model


def build_extensive_smip(instance: Instance, scenarios: ScenarioSet) -> ModelIR:
    """Extensive form of the two-stage stochastic facility/distribution MILP."""
    return _scenario_model("smip", instance, scenarios)


def build_deterministic(instance: Instance, mean_demand) -> ModelIR:
    """The stochastic model with one scenario at the mean demand."""
    mu = mean_demand.mean if isinstance(mean_demand, MomentEstimate) else np.asarray(mean_demand)
    model = _scenario_model("deterministic", instance, ScenarioSet.point_mass(mu))
    return model


def build_dc_inventory_extension(instance: Instance, scenarios: ScenarioSet) -> ModelIR:
    """Stochastic model with inventory held at DCs between periods."""
    if instance.dc_inventory_unit_cost is None or instance.initial_dc_inventory is None:
        raise BuildError("DC inventory needs dc_inventory_unit_cost and initial_dc_inventory")
    model = _scenario_model("smip-dc-inventory", instance, scenarios, dc_inventory=True)
    return model


def build_lead_time_extension(instance: Instance, scenarios: ScenarioSet) -> ModelIR:
    """Stochastic model where a shipment sent in period t arrives in t + L_ij.

    Shipments whose arrival falls beyond the horizon never arrive.
    """
    return _scenario_model("smip-lead-time", instance, scenarios, lead=instance.lead_times())


def build_multi_type_extension(instance: TypedInstance, scenarios: ScenarioSet) -> ModelIR:
    """Stochastic model with typed DCs; demand is split across resource types."""
    _require_valid(instance)
    try:
        check_scenarios(instance, scenarios)
    except InputError as e:
        raise BuildError(str(e)) from None
    I, J, T, L = instance.n_dcs, instance.n_sites, instance.n_periods, instance.n_types
    W = scenarios.n_scenarios
    b = ModelBuilder("smip-multi-type")
    xlo, xhi = instance.x_bounds()
    x = b.add_vars("x", (I, L), lb=xlo, ub=xhi, cost=instance.operating_cost, integer=True)
    ch = np.repeat(instance.capacity_unit_cost[:, None, :], T, axis=1)
    h = b.add_vars("h", (I, T, L), cost=ch)
    for i in range(I):
        for t in range(T):
            for l in range(L):
                b.add_row("capacity_link", (i, t, l), [h[i, t, l], x[i, l]],
                          [1.0, -instance.dc_capacity_limit[i, l]], LE, 0.0)
    for t in range(T):
        b.add_row("budget", (t,), h[:, t, :], 1.0, LE, instance.temporal_budget[t])
    pieces = []
    for w in range(W):
        tag = (w,)
        p = scenarios.probabilities[w]
        xi = scenarios.demand[w]
        s = b.add_vars(None, (I, J, T, L), name="s", index_prefix=tag,
                       cost=p * instance.shipping_unit_cost)
        Iv = b.add_vars(None, (J, T, L), name="I", index_prefix=tag,
                        cost=p * instance.inventory_unit_cost)
        u = b.add_vars(None, (J, T, L), name="u", index_prefix=tag,
                       cost=p * instance.penalty_unit_cost)
        dbar = b.add_vars(None, (J, T, L), name="dbar", index_prefix=tag)
        for i in range(I):
            for t in range(T):
                for l in range(L):
                    b.add_row("ship", tag + (i, t, l), list(s[i, :, t, l]) + [h[i, t, l]],
                              [1.0] * J + [-1.0], LE, 0.0)
        for j in range(J):
            for t in range(T):
                for l in range(L):
                    cols = list(s[:, j, t, l]) + [u[j, t, l], Iv[j, t, l], dbar[j, t, l]]
                    coefs = [1.0] * I + [1.0, -1.0, -1.0]
                    rhs = 0.0
                    if t > 0:
                        cols += [Iv[j, t - 1, l], u[j, t - 1, l]]
                        coefs += [1.0, -1.0]
                    else:
                        rhs = instance.initial_backlog[j, l] - instance.initial_inventory[j, l]
                    b.add_row("flow", tag + (j, t, l), cols, coefs, EQ, rhs)
        for j in range(J):
            for t in range(T):
                b.add_row("demand_split", tag + (j, t), dbar[j, t, :], 1.0, EQ, xi[j, t])
        pieces.append({"s": s, "I": Iv, "u": u, "dbar": dbar})
    _register_stacked(b, pieces)
    b.expect(rows={"capacity_link": I * T * L, "budget": T, "ship": W * I * T * L,
                   "flow": W * J * T * L, "demand_split": W * J * T},
             vars={"x": I * L, "h": I * T * L, "s": W * I * J * T * L,
                   "dbar": W * J * T * L})
    return b.build()


def build_dro_milp(instance: Instance, ambiguity: AmbiguitySpec) -> ModelIR:
    """Single-level MILP of the moment-based distributionally robust model.

    The worst-case expectation is replaced by its LP dual: multipliers
    ``alpha*``/``beta*`` for the lower/upper moment bounds (normalization,
    mean, second moment), one epigraph variable ``phi[k]`` per support point
    bounded below by that point's recourse cost, and a copy of the recourse
    block per support point. The second-moment centre is the estimate's
    ``S = mu^2 + sigma^2``.
    """
    _require_valid(instance)
    if ambiguity.is_general:
        raise BuildError("the MILP builder supports the first/second-moment form only")
    J, T = instance.n_sites, instance.n_periods
    if ambiguity.shape != (J, T):
        raise BuildError(f"ambiguity support has shape {ambiguity.shape}, instance needs {(J, T)}")
    try:
        ambiguity.feasible_distribution()
    except AmbiguityError as e:
        raise BuildError(str(e)) from None
    I = instance.n_dcs
    K = ambiguity.K
    mlo, mhi = ambiguity.mean_bounds()
    slo, shi = ambiguity.second_moment_bounds()

    b = ModelBuilder("dro")
    x, h = _first_stage(b, instance)
    a1 = b.add_vars("alpha1", (), cost=-1.0)
    a2 = b.add_vars("alpha2", (J, T), cost=-mlo)
    a3 = b.add_vars("alpha3", (J, T), cost=-slo)
    b1 = b.add_vars("beta1", (), cost=1.0)
    b2 = b.add_vars("beta2", (J, T), cost=mhi)
    b3 = b.add_vars("beta3", (J, T), cost=shi)
    pieces = []
    phis = []
    for k in range(K):
        xi = ambiguity.support[k]
        blocks, costs = _recourse(b, instance, xi, h, (k,))
        phi = b.add_vars(None, (), name="phi", index_prefix=(k,))
        cols = [a1, b1] + list(a2.ravel()) + list(b2.ravel()) + list(a3.ravel()) \
            + list(b3.ravel()) + [phi]
        coefs = np.concatenate([[-1.0, 1.0], -xi.ravel(), xi.ravel(),
                                -(xi ** 2).ravel(), (xi ** 2).ravel(), [-1.0]])
        b.add_row("coupling", (k,), cols, coefs, GE, 0.0)
        cols = [phi]
        coefs = [1.0]
        for key, idx in blocks.items():
            cols += list(idx.ravel())
            coefs += list(-np.asarray(costs[key]).ravel())
        b.add_row("phi_def", (k,), cols, coefs, EQ, 0.0)
        pieces.append(blocks)
        phis.append(phi)
    _register_stacked(b, pieces)
    b.register("phi", np.array(phis, dtype=np.int64).reshape(K))
    b.expect(rows={"coupling": K, "phi_def": K, "ship": K * I * T, "flow": K * J * T},
             vars={"s": K * I * J * T, "phi": K, "alpha2": J * T, "beta3": J * T})
    model = b.build()
    assert model.n_vars == I + I * T + 2 + 4 * J * T + K * (I * J * T + 2 * J * T + 1)
    return model


def dro_worst_case_part(model: ModelIR, x: np.ndarray) -> float:
    """Value of the dual (worst-case expectation) terms of a DRO solution."""
    keys = ("alpha1", "alpha2", "alpha3", "beta1", "beta2", "beta3")
    cols = np.concatenate([np.ravel(model.blocks[k]) for k in keys])
    return float(model.obj[cols] @ np.asarray(x)[cols])


def build_worst_case_lp(ambiguity: AmbiguitySpec, recourse_costs) -> ModelIR:
    """Worst-case expectation over the ambiguity set as a minimization LP.

    Maximizes ``sum_k p_k g_k`` (stored as minimizing its negative) over
    ``p >= 0`` subject to every finite lower and upper moment bound, one row
    per bound side so the row duals are the lower/upper multipliers.
    """
    g = np.asarray(recourse_costs, dtype=float).reshape(-1)
    F, lo, hi, labels = ambiguity.moment_system()
    K, m = F.shape
    if g.size != K:
        raise BuildError(f"{g.size} recourse values for {K} support points")
    b = ModelBuilder("worst-case-expectation")
    p = b.add_vars("p", (K,), cost=-g)
    n_lo = n_hi = 0
    for s in range(m):
        if np.isfinite(lo[s]):
            b.add_row("lower", (s,), p, F[:, s], GE, lo[s])
            n_lo += 1
    for s in range(m):
        if np.isfinite(hi[s]):
            b.add_row("upper", (s,), p, F[:, s], LE, hi[s])
            n_hi += 1
    b.expect(rows={"lower": n_lo, "upper": n_hi}, vars={"p": K})
    return b.build()
