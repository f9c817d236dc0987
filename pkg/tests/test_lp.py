import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pandist import GE, LE, EQ, ModelBuilder, solve_lp
from pandist.dro_verify import build_second_stage
from pandist.lp import INFEASIBLE, ITERATION_LIMIT, OPTIMAL, UNBOUNDED

from factories import random_instance


def one_var(sense, rhs, lb=0.0):
    b = ModelBuilder("one")
    x = b.add_vars("x", (), lb=lb, cost=1.0)
    b.add_row("r", (), [x], [1.0], sense, rhs)
    return b.build()


@pytest.mark.parametrize("method", ["simplex", "highs"])
def test_min_x_with_lower_bound_three(method):
    sol = solve_lp(one_var(GE, 3.0), method=method)
    assert sol.status == OPTIMAL
    assert sol.x[0] == pytest.approx(3.0)
    assert sol.objective == pytest.approx(3.0)


@pytest.mark.parametrize("method", ["simplex", "highs"])
def test_infeasible(method):
    assert solve_lp(one_var(LE, -1.0), method=method).status == INFEASIBLE


def test_unbounded():
    b = ModelBuilder("ray")
    x = b.add_vars("x", (), lb=-np.inf, cost=1.0)
    b.add_row("r", (), [x], [1.0], LE, 5.0)
    assert solve_lp(b.build(), method="simplex").status == UNBOUNDED


def test_single_arc_second_stage_ships_demand():
    inst = random_instance(0, 1, 1, 1, capacity_unit_cost=[0.0], shipping_unit_cost=[[[1.0]]],
                           inventory_unit_cost=[[0.5]], penalty_unit_cost=[[100.0]],
                           initial_inventory=[0.0], initial_backlog=[0.0])
    model = build_second_stage(inst, [[10.0]], [[7.0]])
    sol = solve_lp(model, method="simplex")
    assert sol.objective == pytest.approx(7.0)
    assert model.value(sol.x, "s").item() == pytest.approx(7.0)


def degenerate_corpus():
    out = []
    # all-zero costs, duplicated rows
    b = ModelBuilder("dup")
    x = b.add_vars("x", (3,), ub=5.0)
    for k in range(4):
        b.add_row("r", (k,), x, [1.0, 1.0, 1.0], LE, 2.0)
        b.add_row("s", (k,), x, [1.0, -1.0, 0.0], EQ, 0.0)
    out.append(b.build())
    # classic cycling example (Beale)
    b = ModelBuilder("beale")
    x = b.add_vars("x", (4,), cost=[-0.75, 150.0, -0.02, 6.0])
    b.add_row("a", (), x, [0.25, -60.0, -0.04, 9.0], LE, 0.0)
    b.add_row("b", (), x, [0.5, -90.0, -0.02, 3.0], LE, 0.0)
    b.add_row("c", (), x[2:3], [1.0], LE, 1.0)
    out.append(b.build())
    # many ties at zero rhs
    b = ModelBuilder("ties")
    x = b.add_vars("x", (5,), cost=-1.0)
    for k in range(5):
        b.add_row("r", (k,), x, np.roll([1.0, 1.0, 0.0, 0.0, 0.0], k), LE, 0.0)
    b.add_row("cap", (), x, np.ones(5), LE, 0.0)
    out.append(b.build())
    return out


@pytest.mark.parametrize("model", degenerate_corpus(), ids=lambda m: m.name)
def test_degenerate_lps_terminate(model):
    sol = solve_lp(model, method="simplex")
    assert sol.status == OPTIMAL
    assert sol.iterations <= 50 * (model.n_rows + model.n_vars)
    ref = solve_lp(model, method="highs")
    assert sol.objective == pytest.approx(ref.objective, abs=1e-9)


def test_beale_optimum():
    sol = solve_lp(degenerate_corpus()[1], method="simplex")
    assert sol.objective == pytest.approx(-0.05)


@st.composite
def random_lp(draw):
    n = draw(st.integers(1, 5))
    m = draw(st.integers(1, 5))
    seed = draw(st.integers(0, 2 ** 31))
    rng = np.random.default_rng(seed)
    b = ModelBuilder("rand")
    x = b.add_vars("x", (n,), lb=0.0, ub=rng.choice([10.0, np.inf], n),
                   cost=np.round(rng.uniform(-3, 3, n), 2))
    for k in range(m):
        coefs = np.round(rng.uniform(-2, 4, n), 2)
        sense = [LE, GE, EQ][rng.integers(3)]
        b.add_row("r", (k,), x, coefs, sense, float(np.round(rng.uniform(-2, 8), 2)))
    return b.build()


@settings(max_examples=80, deadline=None)
@given(random_lp())
def test_simplex_agrees_with_highs(model):
    ours = solve_lp(model, method="simplex")
    ref = solve_lp(model, method="highs")
    assert ours.status != ITERATION_LIMIT
    if ref.status == OPTIMAL:
        assert ours.status == OPTIMAL
        assert ours.objective == pytest.approx(ref.objective, rel=1e-6, abs=1e-7)
    else:
        assert ours.status == ref.status


@pytest.mark.parametrize("seed", range(10))
def test_optimal_solves_are_certified(seed):
    inst = random_instance(seed, 3, 3, 3)
    rng = np.random.default_rng(seed)
    model = build_second_stage(inst, rng.uniform(0, 20, (3, 3)), rng.uniform(0, 15, (3, 3)))
    for method in ("simplex", "highs"):
        sol = solve_lp(model, method=method)
        assert sol.optimal
        assert sol.primal_residual <= 1e-6
        assert sol.dual_residual <= 1e-6
        assert sol.duality_gap <= 1e-6 * (1 + abs(sol.objective))


def test_auto_switches_on_size():
    small = solve_lp(one_var(GE, 1.0), method="auto")
    assert small.method == "simplex"


def test_unknown_method_rejected():
    with pytest.raises(ValueError):
        solve_lp(one_var(GE, 1.0), method="magic")
