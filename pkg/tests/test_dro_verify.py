import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pandist import (AmbiguitySpec, InputError, ScenarioSet, build_ambiguity_bounds, build_dro_milp,
                     dro_worst_case_part, empirical_moments, second_stage_cost, second_stage_dual,
                     solve_milp, worst_case_expectation, worst_case_expectation_dual)
from pandist.dro_verify import dual_objective

from factories import random_instance, random_scenarios


def chain(T=1, **over):
    base = dict(operating_cost=[0.0], capacity_unit_cost=[0.0], shipping_unit_cost=np.ones((1, 1, T)),
                inventory_unit_cost=np.full((1, T), 0.5), penalty_unit_cost=np.full((1, T), 100.0),
                initial_inventory=[0.0], initial_backlog=[0.0])
    base.update(over)
    return random_instance(0, 1, 1, T, **base)


def test_no_capacity_backlogs_everything():
    res = second_stage_cost(chain(), [[0.0]], [[5.0]])
    assert res.objective == pytest.approx(500.0)
    assert res.u.item() == pytest.approx(5.0)


def test_single_arc():
    assert second_stage_cost(chain(), [[10.0]], [[7.0]]).objective == pytest.approx(7.0)


def test_two_period_prebuild():
    res = second_stage_cost(chain(T=2), [[10.0, 0.0]], [[3.0, 7.0]])
    assert res.objective == pytest.approx(13.5)
    assert res.s[0, 0, 0] == pytest.approx(10.0)
    assert res.I[0, 0] == pytest.approx(7.0)


def test_dual_matches_on_hand_examples():
    for inst, h, xi, g in [(chain(), [[0.0]], [[5.0]], 500.0), (chain(), [[10.0]], [[7.0]], 7.0),
                           (chain(T=2), [[10.0, 0.0]], [[3.0, 7.0]], 13.5)]:
        cert = second_stage_dual(inst, h, xi)
        assert cert.objective == pytest.approx(g)
        assert dual_objective(inst, h, xi, cert.theta, cert.gamma) == pytest.approx(g)
        assert np.all(cert.theta <= 1e-12)


def test_zero_demand_dual_is_zero():
    inst = random_instance(3, initial_inventory=np.zeros(2), initial_backlog=np.zeros(2))
    assert second_stage_dual(inst, np.ones((2, 2)), np.zeros((2, 2))).objective == pytest.approx(0.0)


def test_huge_capacity_zero_theta():
    inst = random_instance(4)
    cert = second_stage_dual(inst, np.full((2, 2), 1e6), np.full((2, 2), 5.0))
    assert np.allclose(cert.theta, 0.0, atol=1e-9)


@pytest.mark.parametrize("seed", range(50))
def test_strong_duality_random(seed):
    rng = np.random.default_rng(seed)
    I, J, T = rng.integers(1, 5), rng.integers(1, 5), rng.integers(1, 4)
    inst = random_instance(seed, I, J, T)
    h = rng.uniform(0, 15, (I, T))
    xi = rng.uniform(0, 20, (J, T))
    g = second_stage_cost(inst, h, xi).objective
    assert second_stage_dual(inst, h, xi).objective == pytest.approx(g, rel=1e-6, abs=1e-9)


def test_lead_time_dual_not_supported():
    inst = random_instance(0, lead_time=np.ones((2, 2), int))
    with pytest.raises(InputError):
        second_stage_dual(inst, np.ones((2, 2)), np.ones((2, 2)))


def test_shape_errors():
    with pytest.raises(InputError):
        second_stage_cost(random_instance(0), np.ones((3, 2)), np.ones((2, 2)))


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10_000), lam=st.floats(0, 1))
def test_recourse_convex_in_capacity(seed, lam):
    rng = np.random.default_rng(seed)
    inst = random_instance(seed, 2, 2, 2)
    xi = rng.uniform(0, 20, (2, 2))
    h1, h2 = rng.uniform(0, 15, (2, 2, 2))
    g = lambda h: second_stage_cost(inst, h, xi).objective
    assert g(lam * h1 + (1 - lam) * h2) <= lam * g(h1) + (1 - lam) * g(h2) + 1e-6


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_recourse_nonincreasing_in_capacity(seed):
    rng = np.random.default_rng(seed)
    inst = random_instance(seed, 2, 2, 2)
    xi = rng.uniform(0, 20, (2, 2))
    h1 = rng.uniform(0, 10, (2, 2))
    h2 = h1 + rng.uniform(0, 5, (2, 2))
    assert second_stage_cost(inst, h2, xi).objective <= second_stage_cost(inst, h1, xi).objective + 1e-6


def spec_for(sc, slack=0.5, lo=0.1, hi=2.0):
    return build_ambiguity_bounds(empirical_moments(sc), slack, lo, hi, sc)


def test_worst_case_single_point():
    sc = random_scenarios(0, W=1)
    inst = random_instance(0)
    h = np.full((2, 2), 4.0)
    wc = worst_case_expectation(inst, h, spec_for(sc, 0.0, 1.0, 1.0))
    assert wc.value == pytest.approx(second_stage_cost(inst, h, sc.demand[0]).objective)
    assert wc.p == pytest.approx([1.0])


def test_worst_case_constant_costs():
    sc = random_scenarios(1, W=4)
    assert worst_case_expectation(None, None, spec_for(sc), g=np.full(4, 2.5)).value == pytest.approx(2.5)


def test_worst_case_loose_bounds_take_the_max():
    sc = ScenarioSet.equiprobable(np.array([[[1.0]], [[2.0]]]))
    spec = AmbiguitySpec(sc.demand, empirical_moments(sc), np.array([[10.0]]), np.array([[0.0]]),
                         np.array([[100.0]]))
    wc = worst_case_expectation(None, None, spec, g=[1.0, 9.0])
    assert wc.value == pytest.approx(9.0)
    assert wc.p == pytest.approx([0.0, 1.0])


@pytest.mark.parametrize("seed", range(50))
def test_worst_case_duality_random(seed):
    rng = np.random.default_rng(seed)
    K = int(rng.integers(1, 11))
    J, T = int(rng.integers(1, 3)), int(rng.integers(1, 3))
    inst = random_instance(seed, 2, J, T)
    sc = random_scenarios(seed, J, T, W=K)
    spec = spec_for(sc, rng.uniform(0, 0.5), rng.uniform(0.1, 1), rng.uniform(1, 3))
    h = rng.uniform(0, 15, (2, T))
    primal = worst_case_expectation(inst, h, spec)
    dual = worst_case_expectation_dual(inst, h, spec)
    assert abs(primal.value - dual.value) <= 1e-6 * (1 + abs(primal.value))


@pytest.mark.parametrize("seed", range(3))
def test_dro_recourse_part_equals_worst_case(seed):
    inst = random_instance(seed)
    sc = random_scenarios(seed, W=4)
    spec = spec_for(sc)
    model = build_dro_milp(inst, spec)
    sol = solve_milp(model, gap_tol=0.0)
    h = model.value(sol.x, "h")
    wc = worst_case_expectation(inst, h, spec)
    assert dro_worst_case_part(model, sol.x) == pytest.approx(wc.value, rel=1e-6, abs=1e-8)


@pytest.mark.parametrize("seed", range(5))
def test_wider_ambiguity_never_lowers_worst_case(seed):
    rng = np.random.default_rng(seed)
    sc = random_scenarios(seed, W=5)
    g = rng.uniform(0, 10, 5)
    vals = [worst_case_expectation(None, None, spec_for(sc, s, lo, hi), g=g).value
            for s, lo, hi in [(0.0, 1.0, 1.0), (0.1, 0.8, 1.5), (0.5, 0.1, 2.0), (1.0, 0.0, 4.0)]]
    assert np.all(np.diff(vals) >= -1e-8)


def test_general_moment_form_duality():
    sc = random_scenarios(2, W=6)
    K = 6
    mom = empirical_moments(sc)
    # first moment of (1,1), cross moment of (1,1)*(2,2)
    ex = np.zeros((2, 2, 2), int)
    ex[0, 0, 0] = 1
    ex[1, 0, 0] = ex[1, 1, 1] = 1
    F = np.stack([np.prod(sc.demand.reshape(K, -1) ** e.reshape(-1), axis=1) for e in ex], 1)
    emp = F.mean(axis=0)
    spec = AmbiguitySpec(sc.demand, mom, np.zeros((2, 2)), np.ones((2, 2)), np.ones((2, 2)),
                         exponents=ex, lower=0.8 * emp, upper=1.2 * emp)
    g = np.random.default_rng(2).uniform(0, 5, K)
    p = worst_case_expectation(None, None, spec, g=g)
    d = worst_case_expectation_dual(None, None, spec, g=g)
    assert p.value == pytest.approx(d.value, rel=1e-6)
