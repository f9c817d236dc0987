"""Suite-wide solution auditing and the acceptance summary.

Every optimal branch-and-bound result and every second-stage LP solved
anywhere in the suite is checked for flow-balance feasibility and
inventory/backlog complementarity. The wrappers are installed at import
time, before test modules bind the solver names.
"""
import functools

import pytest

import pandist
import pandist.dro_verify
import pandist.evaluation
import pandist.milp
from pandist.evaluation import check_solution_invariants

AUDIT = {"checked": 0, "violations": []}
ACCEPTANCE = {}


def _audit(model, x, origin):
    if x is None:
        return
    if "I" not in model.blocks and "flow" not in model.row_blocks:
        return
    AUDIT["checked"] += 1
    problems = check_solution_invariants(model, x)
    if problems:
        AUDIT["violations"].append((origin, model.name, problems))
        raise AssertionError(f"{origin} on {model.name}: {problems}")


_orig_milp = pandist.milp.solve_milp


@functools.wraps(_orig_milp)
def _audited_milp(model, *args, **kwargs):
    sol = _orig_milp(model, *args, **kwargs)
    if sol.status == pandist.milp.MILP_OPTIMAL:
        _audit(model, sol.x, "solve_milp")
    return sol


_orig_second = pandist.dro_verify.second_stage_cost


@functools.wraps(_orig_second)
def _audited_second(instance, h, xi, *args, **kwargs):
    res = _orig_second(instance, h, xi, *args, **kwargs)
    _audit(res.model, res.x, "second_stage_cost")
    return res


for mod in (pandist, pandist.milp, pandist.evaluation):
    mod.solve_milp = _audited_milp
for mod in (pandist, pandist.dro_verify, pandist.evaluation):
    mod.second_stage_cost = _audited_second


@pytest.fixture
def audit():
    return AUDIT


@pytest.fixture
def record_criterion():
    def record(number, passed, detail=""):
        ACCEPTANCE[number] = (passed if isinstance(passed, str) else bool(passed), detail)
    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    tr = terminalreporter
    if 6 in ACCEPTANCE:
        ok = ACCEPTANCE[6][0] and not AUDIT["violations"] and AUDIT["checked"] > 0
        ACCEPTANCE[6] = (ok, f"{AUDIT['checked']} optimal solutions audited across the suite, "
                             f"{len(AUDIT['violations'])} violations")
    tr.section("acceptance criteria")
    for number in sorted(ACCEPTANCE, key=lambda k: (int(str(k).rstrip("ab")), str(k))):
        passed, detail = ACCEPTANCE[number]
        tag = "PASS" if passed is True else ("DEVIATION" if passed == "deviation" else "FAIL")
        tr.write_line(f"criterion {number}: {tag}  {detail}")
    tr.write_line(f"solutions audited for flow balance and complementarity: {AUDIT['checked']}, "
                  f"violations: {len(AUDIT['violations'])}")
