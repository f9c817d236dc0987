"""Best-first branch-and-bound over binary variables, plus an enumeration oracle."""
from __future__ import annotations

import heapq
import itertools
import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .lp import OPTIMAL, UNBOUNDED, solve_lp
from .model import ModelIR

log = logging.getLogger(__name__)

INT_TOL = 1e-6
OPT_TOL = 1e-6
MAX_ENUM_BINARIES = 12

MILP_OPTIMAL = "optimal"
MILP_INFEASIBLE = "infeasible"
GAP_LIMIT = "gap-limit"
NODE_LIMIT = "node-limit"


class SolverLimitError(RuntimeError):
    """A search limit was hit before optimality could be proven."""


@dataclass
class MilpSolution:
    status: str
    x: Optional[np.ndarray]
    objective: float
    bound: float
    nodes: int
    lp_solves: int = 0
    bound_trace: list = field(default_factory=list)

    @property
    def optimal(self) -> bool:
        return self.status == MILP_OPTIMAL

    @property
    def gap(self) -> float:
        return abs(self.objective - self.bound)


def _close_tol(inc_obj: float, gap_tol: float) -> float:
    floor = 1e-6 if gap_tol >= OPT_TOL else 1e-9
    return max(gap_tol * abs(inc_obj), floor)


def solve_milp(model: ModelIR, node_limit: int = 100_000, gap_tol: float = 1e-6,
               lp_method: str = "auto") -> MilpSolution:
    """Branch-and-bound with best-bound node selection.

    Children fix the most fractional binary (lowest index on ties) to 0 and 1
    through bound changes; open nodes are ordered by LP bound with FIFO
    tie-breaking so the tree is reproducible. Search stops once the best open
    bound is within ``max(gap_tol*|incumbent|, 1e-6)`` of the incumbent
    (``gap_tol=0`` searches to LP precision). The status is ``optimal`` when
    the final gap meets the 1e-6 optimality tolerance and ``gap-limit``
    otherwise; ``node-limit`` when the node budget ran out first.
    """
    ints = np.flatnonzero(model.integer)
    lb0 = model.lb.copy()
    ub0 = model.ub.copy()
    # binaries only: clamp declared bounds into [0, 1] and round inward
    lb0[ints] = np.ceil(np.maximum(lb0[ints], 0.0) - INT_TOL)
    ub0[ints] = np.floor(np.minimum(ub0[ints], 1.0) + INT_TOL)
    counter = itertools.count()
    incumbent = None
    inc_obj = np.inf
    nodes = 0
    lp_solves = 0
    trace = []
    best_bound = -np.inf
    pruned = np.inf
    hit_limit = False

    root = solve_lp(model, lb0, ub0, method=lp_method)
    lp_solves += 1
    nodes += 1
    if root.status == UNBOUNDED:
        raise SolverLimitError("LP relaxation is unbounded")
    if root.status != OPTIMAL:
        return MilpSolution(MILP_INFEASIBLE, None, np.inf, np.inf, nodes, lp_solves, trace)
    heap = [(root.objective, next(counter), lb0, ub0, root)]

    while heap:
        bound = heap[0][0]
        best_bound = max(best_bound, bound)
        trace.append(best_bound)
        if incumbent is not None and inc_obj - best_bound <= _close_tol(inc_obj, gap_tol):
            break
        if nodes >= node_limit:
            hit_limit = True
            break
        _, _, lb, ub, sol = heapq.heappop(heap)
        xi = sol.x[ints]
        frac = np.abs(xi - np.round(xi))
        if frac.max(initial=0.0) <= INT_TOL:
            if sol.objective < inc_obj:
                incumbent = sol.x.copy()
                incumbent[ints] = np.round(incumbent[ints])
                inc_obj = sol.objective
            continue
        # most fractional: farthest from an integer, ties to lowest index
        j = ints[int(np.argmax(frac))]
        for val in (0.0, 1.0):
            clb, cub = lb.copy(), ub.copy()
            clb[j] = cub[j] = val
            child = solve_lp(model, clb, cub, method=lp_method)
            lp_solves += 1
            nodes += 1
            if child.status != OPTIMAL:
                continue
            cb = max(child.objective, bound)
            if incumbent is not None and cb >= inc_obj - _close_tol(inc_obj, gap_tol):
                pruned = min(pruned, cb)
                continue
            heapq.heappush(heap, (cb, next(counter), clb, cub, child))

    open_bound = heap[0][0] if heap else np.inf
    if incumbent is None:
        status = NODE_LIMIT if hit_limit else MILP_INFEASIBLE
        return MilpSolution(status, None, np.inf, min(open_bound, pruned), nodes, lp_solves, trace)
    final_bound = min(inc_obj, open_bound, pruned)
    gap = inc_obj - final_bound
    if gap <= max(OPT_TOL, OPT_TOL * abs(inc_obj)):
        status = MILP_OPTIMAL
    elif hit_limit:
        status = NODE_LIMIT
    else:
        status = GAP_LIMIT
    log.debug("branch-and-bound: %d nodes, obj %.6g, bound %.6g", nodes, inc_obj, final_bound)
    return MilpSolution(status, incumbent, inc_obj, final_bound, nodes, lp_solves, trace)


def enumerate_bruteforce(model: ModelIR, lp_method: str = "auto") -> MilpSolution:
    """Solve the LP for every 0/1 assignment of the free binaries; keep the best."""
    free = model.free_binaries
    if free.size > MAX_ENUM_BINARIES:
        raise ValueError(f"{free.size} free binaries; enumeration is limited to {MAX_ENUM_BINARIES}")
    best = None
    best_obj = np.inf
    solves = 0
    for bits in itertools.product((0.0, 1.0), repeat=free.size):
        lb = model.lb.copy()
        ub = model.ub.copy()
        lb[free] = ub[free] = bits
        sol = solve_lp(model, lb, ub, method=lp_method)
        solves += 1
        if sol.status == OPTIMAL and sol.objective < best_obj:
            best_obj = sol.objective
            best = sol.x.copy()
            best[model.integer] = np.round(best[model.integer])
    if best is None:
        return MilpSolution(MILP_INFEASIBLE, None, np.inf, np.inf, solves, solves)
    return MilpSolution(MILP_OPTIMAL, best, best_obj, best_obj, solves, solves)
