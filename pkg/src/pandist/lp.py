"""Linear programming: a bounded-variable revised simplex and a HiGHS backend.

``solve_lp`` ignores integrality flags. Duals follow the minimization sign
convention: rows ``<=`` get ``y <= 0``, rows ``>=`` get ``y >= 0`` and reduced
costs are ``c - A^T y``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

from .model import EQ, GE, LE, ModelIR

log = logging.getLogger(__name__)

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
ITERATION_LIMIT = "iteration-limit"

PIVOT_TOL = 1e-9
FEAS_TOL = 1e-6
STALL_THRESHOLD = 30
REFACTOR_EVERY = 50
# models with more matrix entries than this go to HiGHS under method="auto"
AUTO_DENSE_LIMIT = 200_000


@dataclass
class LpSolution:
    status: str
    x: Optional[np.ndarray]
    duals: Optional[np.ndarray]
    objective: float
    dual_objective: float = np.nan
    reduced_costs: Optional[np.ndarray] = None
    iterations: int = 0
    method: str = ""
    primal_residual: float = np.nan
    dual_residual: float = np.nan

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL

    @property
    def duality_gap(self) -> float:
        return abs(self.objective - self.dual_objective)


class _Simplex:
    """Primal revised simplex on ``min c.y, Ay = b, 0 <= y <= U`` (b >= 0)."""

    def __init__(self, A, b, U, basis, max_iter):
        self.A = A
        self.b = b
        self.U = U
        self.m, self.n = A.shape
        self.basis = np.array(basis, dtype=np.int64)
        self.at_up = np.zeros(self.n, dtype=bool)
        self.max_iter = max_iter
        self.iterations = 0
        self._refactor()

    def _refactor(self):
        B = self.A[:, self.basis]
        self.Binv = np.linalg.inv(B) if self.m else np.zeros((0, 0))
        self._since_refactor = 0
        self._recompute_xb()

    def _recompute_xb(self):
        rhs = self.b.copy()
        up = np.flatnonzero(self.at_up)
        if up.size:
            rhs -= self.A[:, up] @ self.U[up]
        self.xB = self.Binv @ rhs

    def values(self) -> np.ndarray:
        y = np.where(self.at_up, self.U, 0.0)
        y[self.basis] = self.xB
        return y

    def run(self, c) -> str:
        cmax = 1.0 + (np.abs(c).max() if c.size else 0.0)
        dtol = 1e-9 * cmax
        bland = False
        degenerate = 0
        isbasic = np.zeros(self.n, dtype=bool)
        isbasic[self.basis] = True
        while True:
            if self.iterations >= self.max_iter:
                return ITERATION_LIMIT
            y = c[self.basis] @ self.Binv
            d = c - y @ self.A
            inc = ~isbasic & ~self.at_up & (self.U > 0) & (d < -dtol)
            dec = ~isbasic & self.at_up & (d > dtol)
            cand = np.flatnonzero(inc | dec)
            if cand.size == 0:
                return OPTIMAL
            if bland:
                q = int(cand[0])
            else:
                q = int(cand[np.argmax(np.abs(d[cand]))])
            sigma = 1.0 if inc[q] else -1.0
            w = self.Binv @ self.A[:, q]
            alpha = sigma * w
            t_row = np.inf
            r = -1
            to_upper = False
            Ub = self.U[self.basis]
            pos = np.flatnonzero(alpha > PIVOT_TOL)
            neg = np.flatnonzero((alpha < -PIVOT_TOL) & np.isfinite(Ub))
            ratios = np.concatenate([
                np.maximum(self.xB[pos], 0.0) / alpha[pos],
                np.maximum(Ub[neg] - self.xB[neg], 0.0) / -alpha[neg],
            ])
            rows = np.concatenate([pos, neg])
            if rows.size:
                t_row = ratios.min()
                ties = rows[ratios <= t_row + 1e-12]
                # Bland-compatible tie-break: smallest leaving variable index
                r = int(ties[np.argmin(self.basis[ties])])
                to_upper = alpha[r] < 0
            t_flip = self.U[q]
            t = min(t_row, t_flip)
            if not np.isfinite(t):
                return UNBOUNDED
            self.iterations += 1
            if t <= 1e-12:
                degenerate += 1
                if degenerate > STALL_THRESHOLD and not bland:
                    log.debug("simplex stalled after %d degenerate pivots; using Bland's rule",
                              degenerate)
                    bland = True
            else:
                degenerate = 0
            if t_flip <= t_row:
                self.xB -= sigma * t_flip * w
                self.at_up[q] = not self.at_up[q]
                continue
            enter_val = t if sigma > 0 else self.U[q] - t
            self.xB -= sigma * t * w
            leave = self.basis[r]
            self.at_up[leave] = bool(to_upper)
            isbasic[leave] = False
            isbasic[q] = True
            self.at_up[q] = False
            self.basis[r] = q
            self.xB[r] = enter_val
            # product-form update of the explicit inverse
            piv = w[r]
            row_r = self.Binv[r] / piv
            self.Binv -= np.outer(w, row_r)
            self.Binv[r] = row_r
            self._since_refactor += 1
            if self._since_refactor >= REFACTOR_EVERY:
                self._refactor()

    def duals(self, c) -> np.ndarray:
        return c[self.basis] @ self.Binv


def _dense(A):
    return A.toarray() if sp.issparse(A) else np.asarray(A, dtype=float)


def _simplex_solve(c, A, senses, b, lb, ub):
    """Returns (status, x, y, iterations) in the caller's variable/row space."""
    m, n = A.shape
    x = np.zeros(n)
    y_out = np.zeros(m)
    fixed = np.isfinite(lb) & (lb == ub)
    x[fixed] = lb[fixed]
    b1 = b - A[:, fixed] @ lb[fixed]
    keep_cols = np.flatnonzero(~fixed)
    Ak = A[:, keep_cols]
    nonempty = np.any(Ak != 0, axis=1)
    for i in np.flatnonzero(~nonempty):
        viol = {LE: -b1[i], GE: b1[i], EQ: abs(b1[i])}[senses[i]]
        if viol > FEAS_TOL * (1 + abs(b[i])):
            return INFEASIBLE, None, None, 0
    rows = np.flatnonzero(nonempty)
    Ak = Ak[rows]
    bk = b1[rows]
    sk = senses[rows]

    # columns of the transformed problem: (original column, sign); y >= 0
    cols, signs, offsets, caps = [], [], [], []
    for j in keep_cols:
        lo, hi = lb[j], ub[j]
        if np.isfinite(lo):
            cols.append(j); signs.append(1.0); offsets.append(lo); caps.append(hi - lo)
        elif np.isfinite(hi):
            cols.append(j); signs.append(-1.0); offsets.append(hi); caps.append(np.inf)
        else:
            cols.append(j); signs.append(1.0); offsets.append(0.0); caps.append(np.inf)
            cols.append(j); signs.append(-1.0); offsets.append(0.0); caps.append(np.inf)
    cols = np.array(cols, dtype=np.int64)
    signs = np.array(signs)
    offsets = np.array(offsets)
    caps = np.array(caps)
    colpos = {j: k for k, j in enumerate(keep_cols)}
    kidx = np.array([colpos[j] for j in cols], dtype=np.int64)
    S = Ak[:, kidx] * signs
    base = np.zeros(len(keep_cols))
    first = {}
    for k, j in enumerate(cols):
        first.setdefault(j, k)
    for j, k in first.items():
        base[colpos[j]] = offsets[k]
    bt = bk - Ak @ base
    cs = c[cols] * signs

    mk = len(rows)
    slack_sign = np.array([1.0 if s == LE else (-1.0 if s == GE else 0.0) for s in sk])
    has_slack = slack_sign != 0
    slack_rows = np.flatnonzero(has_slack)
    Sl = np.zeros((mk, slack_rows.size))
    Sl[slack_rows, np.arange(slack_rows.size)] = slack_sign[slack_rows]
    rowsign = np.where(bt < 0, -1.0, 1.0)
    M = np.hstack([S, Sl]) * rowsign[:, None]
    bt = bt * rowsign
    n_struct = S.shape[1]
    n_cols = M.shape[1]
    # rows whose slack enters with +1 start with the slack basic
    basis = np.full(mk, -1, dtype=np.int64)
    for k, r in enumerate(slack_rows):
        if M[r, n_struct + k] > 0:
            basis[r] = n_struct + k
    art_rows = np.flatnonzero(basis < 0)
    Art = np.zeros((mk, art_rows.size))
    Art[art_rows, np.arange(art_rows.size)] = 1.0
    basis[art_rows] = n_cols + np.arange(art_rows.size)
    Afull = np.hstack([M, Art])
    N = Afull.shape[1]
    U = np.concatenate([caps, np.full(slack_rows.size, np.inf), np.full(art_rows.size, np.inf)])
    max_iter = max(1000, 50 * (mk + N))
    spx = _Simplex(Afull, bt, U, basis, max_iter)

    if art_rows.size:
        c1 = np.zeros(N)
        c1[n_cols:] = 1.0
        status = spx.run(c1)
        if status == ITERATION_LIMIT:
            return status, None, None, spx.iterations
        spx._refactor()
        infeas = spx.values()[n_cols:].sum()
        if infeas > FEAS_TOL * (1 + np.abs(bt).max(initial=0.0)):
            return INFEASIBLE, None, None, spx.iterations
        spx.U[n_cols:] = 0.0
        spx.at_up[n_cols:] = False
        spx._recompute_xb()
    c2 = np.concatenate([cs, np.zeros(N - n_struct)])
    status = spx.run(c2)
    if status != OPTIMAL:
        return status, None, None, spx.iterations
    spx._refactor()
    yv = spx.values()[:n_struct]
    xk = base.copy()
    np.add.at(xk, kidx, signs * yv)
    x[keep_cols] = xk
    x = np.clip(x, lb, ub)
    y_out[rows] = spx.duals(c2) * rowsign
    return OPTIMAL, x, y_out, spx.iterations


def _highs_solve(c, A, senses, b, lb, ub):
    A = sp.csr_matrix(A)
    le = np.flatnonzero(senses == LE)
    ge = np.flatnonzero(senses == GE)
    eq = np.flatnonzero(senses == EQ)
    ub_rows = np.concatenate([le, ge])
    A_ub = sp.vstack([A[le], -A[ge]]).tocsr() if ub_rows.size else None
    b_ub = np.concatenate([b[le], -b[ge]]) if ub_rows.size else None
    A_eq = A[eq] if eq.size else None
    b_eq = b[eq] if eq.size else None
    bounds = np.column_stack([np.where(np.isfinite(lb), lb, -np.inf),
                              np.where(np.isfinite(ub), ub, np.inf)])
    bounds = [(None if np.isinf(lo) else lo, None if np.isinf(hi) else hi) for lo, hi in bounds]
    res = linprog(c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq, bounds=bounds,
                  method="highs", options={"presolve": True})
    iters = int(getattr(res, "nit", 0) or 0)
    if res.status == 2:
        return INFEASIBLE, None, None, iters
    if res.status == 3:
        return UNBOUNDED, None, None, iters
    if res.status != 0:
        # HiGHS sometimes reports "infeasible or unbounded" as a failure
        msg = str(res.message).lower()
        if "infeasible" in msg:
            return INFEASIBLE, None, None, iters
        if "unbounded" in msg:
            return UNBOUNDED, None, None, iters
        return ITERATION_LIMIT, None, None, iters
    y = np.zeros(len(b))
    if ub_rows.size:
        marg = res.ineqlin.marginals
        y[le] = marg[:le.size]
        y[ge] = -marg[le.size:]
    if eq.size:
        y[eq] = res.eqlin.marginals
    return OPTIMAL, np.asarray(res.x, dtype=float), y, iters


def _certify(model: ModelIR, c, lb, ub, x, y):
    """Objective, dual objective, reduced costs and scaled residuals."""
    A = model.A
    rc = c - A.T @ y
    cmax = 1.0 + np.abs(c).max(initial=0.0)
    tol = 1e-9 * cmax
    pos = rc > tol
    neg = rc < -tol
    dual_obj = float(model.rhs @ y) + model.obj_const
    dual_obj += float(np.sum(np.where(pos & np.isfinite(lb), rc * np.where(np.isfinite(lb), lb, 0), 0.0)))
    dual_obj += float(np.sum(np.where(neg & np.isfinite(ub), rc * np.where(np.isfinite(ub), ub, 0), 0.0)))
    dres = np.zeros(len(c))
    dres[pos & ~np.isfinite(lb)] = rc[pos & ~np.isfinite(lb)]
    dres[neg & ~np.isfinite(ub)] = -rc[neg & ~np.isfinite(ub)]
    sign_res = np.concatenate([
        np.maximum(y[model.senses == LE], 0.0),
        np.maximum(-y[model.senses == GE], 0.0),
    ])
    dual_res = max(dres.max(initial=0.0), sign_res.max(initial=0.0)) / cmax
    pres = model.residuals(x) / (1.0 + np.abs(model.rhs))
    primal_res = max(pres.max(initial=0.0), model.bound_residual(x))
    return float(c @ x) + model.obj_const, dual_obj, rc, primal_res, dual_res


def solve_lp(model: ModelIR, lb=None, ub=None, method: str = "auto") -> LpSolution:
    """Solve the continuous relaxation of ``model``.

    ``lb``/``ub`` override the model's variable bounds (branch-and-bound uses
    this). ``method`` is ``"simplex"`` (in-house revised simplex),
    ``"highs"`` or ``"auto"`` (simplex for small models, HiGHS otherwise).
    """
    lb = model.lb if lb is None else np.asarray(lb, dtype=float)
    ub = model.ub if ub is None else np.asarray(ub, dtype=float)
    c = model.obj
    if np.any(lb > ub + 1e-12):
        return LpSolution(INFEASIBLE, None, None, np.nan, method=method)
    if method == "auto":
        method = "simplex" if model.n_rows * model.n_vars <= AUTO_DENSE_LIMIT else "highs"
    if method == "simplex":
        status, x, y, iters = _simplex_solve(c, _dense(model.A), model.senses, model.rhs, lb, ub)
    elif method == "highs":
        status, x, y, iters = _highs_solve(c, model.A, model.senses, model.rhs, lb, ub)
    else:
        raise ValueError(f"unknown LP method {method!r}")
    if status != OPTIMAL:
        return LpSolution(status, None, None, np.nan, iterations=iters, method=method)
    obj, dual_obj, rc, pres, dres = _certify(model, c, lb, ub, x, y)
    return LpSolution(OPTIMAL, x, y, obj, dual_obj, rc, iters, method, pres, dres)
