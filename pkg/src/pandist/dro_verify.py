"""Independent checks of the recourse and worst-case-expectation machinery.

The second-stage dual is written out directly rather than read off the LP
solver's row duals, so the primal/dual pair checks the solver as well as the
model.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .formulations import _recourse, build_worst_case_lp
from .instance import Instance, InputError
from .lp import OPTIMAL, solve_lp
from .model import EQ, GE, LE, ModelBuilder, ModelIR
from .scenarios import AmbiguityError, AmbiguitySpec


class OracleError(RuntimeError):
    pass


@dataclass
class SecondStageResult:
    objective: float
    s: np.ndarray
    I: np.ndarray
    u: np.ndarray
    theta: np.ndarray
    model: ModelIR
    x: np.ndarray


@dataclass
class DualCertificate:
    theta: np.ndarray
    gamma: np.ndarray
    objective: float
    residual: float


@dataclass
class WorstCase:
    value: float
    p: np.ndarray
    g: np.ndarray


@dataclass
class WorstCaseDual:
    value: float
    alpha: np.ndarray
    beta: np.ndarray
    g: np.ndarray


def _check_dims(instance: Instance, h, xi):
    I, J, T = instance.shape
    h = np.asarray(h, dtype=float)
    xi = np.asarray(xi, dtype=float)
    if h.shape != (I, T):
        raise InputError(f"capacity matrix has shape {h.shape}, expected {(I, T)}")
    if xi.shape != (J, T):
        raise InputError(f"demand matrix has shape {xi.shape}, expected {(J, T)}")
    if np.any(h < 0) or np.any(xi < 0):
        raise InputError("capacities and demands must be nonnegative")
    return h, xi


def build_second_stage(instance: Instance, h, xi) -> ModelIR:
    """Recourse LP for fixed capacities ``h`` and one demand matrix ``xi``."""
    h, xi = _check_dims(instance, h, xi)
    I, J, T = instance.shape
    b = ModelBuilder("second-stage")
    hv = b.add_vars("h", (I, T), lb=h, ub=h)
    lead = instance.lead_times() if instance.lead_time is not None else None
    blocks, costs = _recourse(b, instance, xi, hv, (), lead=lead)
    for key, idx in blocks.items():
        b.register(key, idx)
        b.add_cost(idx, costs[key])
    return b.build()


def second_stage_cost(instance: Instance, h, xi, method: str = "auto") -> SecondStageResult:
    """Optimal recourse cost g(h, xi) and the recourse decisions.

    Backlog variables give complete recourse, so a non-optimal status means
    the solver failed.
    """
    model = build_second_stage(instance, h, xi)
    sol = solve_lp(model, method=method)
    if sol.status != OPTIMAL:
        raise OracleError(f"second-stage LP returned {sol.status}")
    x = sol.x
    theta = sol.duals[model.row_blocks["ship"]].reshape(instance.n_dcs, instance.n_periods)
    return SecondStageResult(sol.objective, model.value(x, "s"), model.value(x, "I"),
                             model.value(x, "u"), theta, model, x)


def build_second_stage_dual(instance: Instance, h, xi) -> ModelIR:
    """Dual of the recourse LP, stated as a minimization of the negated objective.

    Variables: ``theta[i, t] <= 0`` for the shipping-capacity rows and free
    ``gamma[j, t]`` for the flow-balance rows. Initial inventory and backlog
    enter only through the first-period right-hand side.
    """
    h, xi = _check_dims(instance, h, xi)
    if instance.lead_time is not None and np.any(instance.lead_times() != 0):
        raise InputError("the explicit dual covers the zero-lead-time model only")
    I, J, T = instance.shape
    cs, cI, cu = instance.shipping_unit_cost, instance.inventory_unit_cost, instance.penalty_unit_cost
    rhs = xi.copy()
    rhs[:, 0] += instance.initial_backlog - instance.initial_inventory
    b = ModelBuilder("second-stage-dual")
    theta = b.add_vars("theta", (I, T), lb=-np.inf, ub=0.0, cost=-h)
    gamma = b.add_vars("gamma", (J, T), lb=-np.inf, ub=np.inf, cost=-rhs)
    for i in range(I):
        for j in range(J):
            for t in range(T):
                b.add_row("ship_arc", (i, j, t), [theta[i, t], gamma[j, t]], [1.0, 1.0],
                          LE, cs[i, j, t])
    for j in range(J):
        for t in range(T):
            if t < T - 1:
                b.add_row("inventory", (j, t), [gamma[j, t], gamma[j, t + 1]], [-1.0, 1.0],
                          LE, cI[j, t])
                b.add_row("backlog", (j, t), [gamma[j, t], gamma[j, t + 1]], [1.0, -1.0],
                          LE, cu[j, t])
            else:
                b.add_row("inventory", (j, t), [gamma[j, t]], [-1.0], LE, cI[j, t])
                b.add_row("backlog", (j, t), [gamma[j, t]], [1.0], LE, cu[j, t])
    b.expect(rows={"ship_arc": I * J * T, "inventory": J * T, "backlog": J * T})
    return b.build()


def second_stage_dual(instance: Instance, h, xi, method: str = "auto") -> DualCertificate:
    model = build_second_stage_dual(instance, h, xi)
    sol = solve_lp(model, method=method)
    if sol.status != OPTIMAL:
        raise OracleError(f"second-stage dual LP returned {sol.status}")
    theta = model.value(sol.x, "theta")
    gamma = model.value(sol.x, "gamma")
    resid = float(max(model.residuals(sol.x).max(initial=0.0), model.bound_residual(sol.x)))
    return DualCertificate(theta, gamma, -sol.objective, resid)


def dual_objective(instance: Instance, h, xi, theta, gamma) -> float:
    """Dual objective value of a given (theta, gamma)."""
    h, xi = _check_dims(instance, h, xi)
    rhs = xi.copy()
    rhs[:, 0] += instance.initial_backlog - instance.initial_inventory
    return float(np.sum(h * theta) + np.sum(rhs * gamma))


def recourse_values(instance: Instance, h, ambiguity: AmbiguitySpec,
                    method: str = "auto") -> np.ndarray:
    return np.array([second_stage_cost(instance, h, xi, method).objective
                     for xi in ambiguity.support])


def worst_case_expectation(instance: Optional[Instance], h, ambiguity: AmbiguitySpec,
                           g=None, method: str = "auto") -> WorstCase:
    """Largest expected recourse cost over the ambiguity set, and a maximizer."""
    if g is None:
        g = recourse_values(instance, h, ambiguity, method)
    g = np.asarray(g, dtype=float)
    model = build_worst_case_lp(ambiguity, g)
    sol = solve_lp(model, method=method)
    if sol.status != OPTIMAL:
        raise AmbiguityError(f"worst-case expectation LP is {sol.status}")
    return WorstCase(-sol.objective, model.value(sol.x, "p"), g)


def build_worst_case_dual(ambiguity: AmbiguitySpec, g) -> ModelIR:
    """``min -alpha.l + beta.u  s.t.  (beta - alpha).f(xi^k) >= g_k, alpha, beta >= 0``.

    Multipliers exist only for finite bounds.
    """
    g = np.asarray(g, dtype=float).reshape(-1)
    F, lo, hi, _ = ambiguity.moment_system()
    K, m = F.shape
    fl = np.flatnonzero(np.isfinite(lo))
    fh = np.flatnonzero(np.isfinite(hi))
    b = ModelBuilder("worst-case-dual")
    alpha = b.add_vars("alpha", (fl.size,), cost=-lo[fl])
    beta = b.add_vars("beta", (fh.size,), cost=hi[fh])
    for k in range(K):
        cols = np.concatenate([alpha, beta])
        coefs = np.concatenate([-F[k, fl], F[k, fh]])
        b.add_row("support", (k,), cols, coefs, GE, g[k])
    b.expect(rows={"support": K})
    return b.build()


def worst_case_expectation_dual(instance: Optional[Instance], h, ambiguity: AmbiguitySpec,
                                g=None, method: str = "auto") -> WorstCaseDual:
    if g is None:
        g = recourse_values(instance, h, ambiguity, method)
    g = np.asarray(g, dtype=float)
    model = build_worst_case_dual(ambiguity, g)
    sol = solve_lp(model, method=method)
    if sol.status != OPTIMAL:
        raise AmbiguityError(f"worst-case dual LP is {sol.status}")
    return WorstCaseDual(sol.objective, model.value(sol.x, "alpha"),
                         model.value(sol.x, "beta"), g)
