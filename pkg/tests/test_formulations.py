import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pandist import (BuildError, MomentEstimate, ScenarioSet, TypedInstance,
                     build_ambiguity_bounds, build_dc_inventory_extension, build_deterministic,
                     build_dro_milp, build_extensive_smip, build_lead_time_extension,
                     build_multi_type_extension, build_worst_case_lp, empirical_moments,
                     solve_lp, solve_milp)
from pandist.evaluation import check_solution_invariants

from factories import random_instance, random_scenarios


def opt(model):
    sol = solve_milp(model, gap_tol=0.0)
    assert sol.optimal
    return sol


def test_smip_counts():
    model = build_extensive_smip(random_instance(0), random_scenarios(0))
    assert model.n_vars == 38
    assert model.n_rows == 22
    assert model.audit() == []


def test_zero_demand_opens_nothing():
    inst = random_instance(1, initial_inventory=np.zeros(2), initial_backlog=np.zeros(2))
    sol = opt(build_extensive_smip(inst, ScenarioSet.equiprobable(np.zeros((2, 2, 2)))))
    assert sol.objective == pytest.approx(0.0, abs=1e-9)


@pytest.mark.parametrize("seed", range(3))
def test_deterministic_equals_point_mass_smip(seed):
    inst = random_instance(seed)
    mu = random_scenarios(seed, W=1).demand[0]
    a = build_deterministic(inst, MomentEstimate.from_mean_std(mu, 0.0))
    b = build_extensive_smip(inst, ScenarioSet.point_mass(mu))
    assert np.array_equal(a.obj, b.obj)
    assert (a.A != b.A).nnz == 0
    assert np.array_equal(a.rhs, b.rhs)
    assert opt(a).objective == pytest.approx(opt(b).objective)


def test_deterministic_zero_means():
    inst = random_instance(2, initial_inventory=np.zeros(2), initial_backlog=np.zeros(2))
    assert opt(build_deterministic(inst, np.zeros((2, 2)))).objective == pytest.approx(0.0)


def test_deterministic_builds_on_phase_means():
    from pandist.io import US_PHASE_TOTALS, load_builtin
    inst = load_builtin("us_vaccine.json")
    mu = np.asarray(US_PHASE_TOTALS["phase1"])[:, None] / 2.0
    inst2 = inst.replace(n_periods=2, shipping_unit_cost=np.repeat(inst.shipping_unit_cost, 2, 2),
                         inventory_unit_cost=np.repeat(inst.inventory_unit_cost, 2, 1),
                         penalty_unit_cost=np.repeat(inst.penalty_unit_cost, 2, 1),
                         temporal_budget=np.repeat(inst.temporal_budget, 2))
    model = build_deterministic(inst2, np.repeat(mu, 2, 1))
    assert model.audit() == []
    assert mu[0, 0] == 500_000.0


def ext1_instance(seed, cID=0.0, **over):
    inst = random_instance(seed, 2, 2, 3, **over)
    return inst.replace(dc_inventory_unit_cost=np.full((2, 3), cID), initial_dc_inventory=np.zeros(2))


def test_dc_inventory_equivalence_when_customer_holding_is_free():
    inst = ext1_instance(0, inventory_unit_cost=np.zeros((2, 3)),
                         shipping_unit_cost=np.repeat(np.random.default_rng(0).uniform(0.1, 1, (2, 2, 1)), 3, 2))
    sc = random_scenarios(0, 2, 3, W=3)
    base = opt(build_extensive_smip(inst, sc)).objective
    ext = opt(build_dc_inventory_extension(inst, sc)).objective
    assert ext == pytest.approx(base, rel=1e-6)


def test_dc_inventory_carries_initial_stock():
    inst = random_instance(0, 1, 1, 1, initial_inventory=[0.0], initial_backlog=[0.0])
    # holding at the DC must be the cheapest place for the stock to sit
    c_id = 0.5 * float(inst.shipping_unit_cost.min())
    inst = inst.replace(dc_inventory_unit_cost=[[c_id]], initial_dc_inventory=[5.0])
    model = build_dc_inventory_extension(inst, ScenarioSet.point_mass(np.zeros((1, 1))))
    sol = opt(model)
    assert model.value(sol.x, "ID").item() == pytest.approx(5.0)
    assert sol.objective == pytest.approx(5.0 * c_id)


def test_dc_inventory_no_capacity_no_shipments():
    inst = ext1_instance(3, status=["forbidden", "forbidden"])
    model = build_dc_inventory_extension(inst, random_scenarios(3, 2, 3))
    sol = opt(model)
    assert np.allclose(model.value(sol.x, "s"), 0.0)


def test_dc_inventory_requires_fields():
    with pytest.raises(BuildError):
        build_dc_inventory_extension(random_instance(0), random_scenarios(0))


@pytest.mark.parametrize("seed", range(3))
def test_zero_lead_time_is_base(seed):
    inst = random_instance(seed)
    sc = random_scenarios(seed)
    a = build_lead_time_extension(inst.replace(lead_time=np.zeros((2, 2), int)), sc)
    b = build_extensive_smip(inst, sc)
    assert (a.A != b.A).nnz == 0 and np.array_equal(a.obj, b.obj)


def test_lead_time_beyond_horizon_backlogs_everything():
    inst = random_instance(4, initial_inventory=np.zeros(2), initial_backlog=np.zeros(2),
                           lead_time=np.full((2, 2), 2))
    d = np.array([[3.0, 4.0], [1.0, 2.0]])
    sol = opt(build_lead_time_extension(inst, ScenarioSet.point_mass(d)))
    cum = np.cumsum(d, axis=1)
    assert sol.objective == pytest.approx(float(np.sum(inst.penalty_unit_cost * cum)))


def test_lead_time_two_period_chain():
    inst = random_instance(0, 1, 1, 2, operating_cost=[0.0], capacity_unit_cost=[0.0],
                           shipping_unit_cost=np.ones((1, 1, 2)), inventory_unit_cost=np.full((1, 2), 0.5),
                           penalty_unit_cost=np.full((1, 2), 100.0), initial_inventory=[0.0],
                           initial_backlog=[0.0], lead_time=[[1]])
    model = build_lead_time_extension(inst, ScenarioSet.point_mass(np.array([[0.0, 10.0]])))
    sol = opt(model)
    assert sol.objective == pytest.approx(10.0)
    assert model.value(sol.x, "s")[0, 0, 0, 0] == pytest.approx(10.0)


@pytest.mark.parametrize("seed", range(3))
def test_single_type_matches_base(seed):
    inst = random_instance(seed)
    sc = random_scenarios(seed)
    typed = TypedInstance.from_instance(inst)
    assert opt(build_multi_type_extension(typed, sc)).objective == pytest.approx(
        opt(build_extensive_smip(inst, sc)).objective, rel=1e-6)


def test_cheaper_type_takes_all_demand():
    typed = TypedInstance(
        dc_sites=["a"], demand_sites=["b"], n_periods=1, resource_types=["dear", "cheap"],
        operating_cost=[[5.0, 1.0]], capacity_unit_cost=[[2.0, 0.5]],
        shipping_unit_cost=[[[[2.0, 0.5]]]], inventory_unit_cost=[[[1.0, 0.1]]],
        penalty_unit_cost=[[[50.0, 40.0]]], dc_capacity_limit=[[100.0, 1000.0]],
        temporal_budget=[1000.0], initial_inventory=[[0.0, 0.0]], initial_backlog=[[0.0, 0.0]],
        dc_status=[["candidate", "candidate"]])
    model = build_multi_type_extension(typed, ScenarioSet.point_mass(np.array([[7.0]])))
    sol = opt(model)
    dbar = model.value(sol.x, "dbar")
    assert dbar[0, 0, 0, 0] == pytest.approx(0.0)
    assert dbar[0, 0, 0, 1] == pytest.approx(7.0)


def test_multi_type_zero_demand():
    typed = TypedInstance.from_instance(random_instance(5, initial_inventory=np.zeros(2),
                                                        initial_backlog=np.zeros(2)))
    sol = opt(build_multi_type_extension(typed, ScenarioSet.point_mass(np.zeros((2, 2)))))
    assert sol.objective == pytest.approx(0.0)


def ambiguity_for(sc, slack=0.0, lo=1.0, hi=1.0):
    return build_ambiguity_bounds(empirical_moments(sc), slack, lo, hi, sc)


@pytest.mark.parametrize("K", [1, 3])
def test_dro_variable_count(K):
    sc = random_scenarios(0, W=K)
    model = build_dro_milp(random_instance(0), ambiguity_for(sc, 0.5, 0.1, 2.0))
    I, J, T = 2, 2, 2
    assert model.n_vars == I + I * T + 2 + 4 * J * T + K * (I * J * T + 2 * J * T + 1)
    assert model.audit() == []


@pytest.mark.parametrize("seed", range(3))
def test_dro_point_mass_equals_sp(seed):
    inst = random_instance(seed)
    sc = random_scenarios(seed, W=1)
    dro = opt(build_dro_milp(inst, ambiguity_for(sc)))
    sp = opt(build_extensive_smip(inst, sc))
    assert dro.objective == pytest.approx(sp.objective, rel=1e-6)


@pytest.mark.parametrize("seed", range(4))
def test_dro_dominates_sp_and_is_monotone_in_upper_factor(seed):
    inst = random_instance(seed)
    sc = random_scenarios(seed, W=4)
    sp = opt(build_extensive_smip(inst, sc)).objective
    vals = [opt(build_dro_milp(inst, ambiguity_for(sc, 0.5, 0.1, hi))).objective for hi in (2.0, 4.0)]
    assert vals[0] >= sp - 1e-7
    assert vals[1] >= vals[0] - 1e-8


def test_dro_rejects_general_form():
    from pandist import AmbiguitySpec
    sc = random_scenarios(0, W=2)
    spec = AmbiguitySpec(sc.demand, empirical_moments(sc), np.zeros((2, 2)), np.ones((2, 2)),
                         np.ones((2, 2)), exponents=np.zeros((1, 2, 2), int),
                         lower=np.array([1.0]), upper=np.array([1.0]))
    with pytest.raises(BuildError):
        build_dro_milp(random_instance(0), spec)


def wc_value(spec, g):
    sol = solve_lp(build_worst_case_lp(spec, g))
    return -sol.objective, sol


def test_worst_case_single_point():
    sc = random_scenarios(0, W=1)
    value, sol = wc_value(ambiguity_for(sc), [4.2])
    assert value == pytest.approx(4.2)
    assert sol.x[0] == pytest.approx(1.0)


def test_worst_case_equal_costs():
    sc = random_scenarios(1, W=3)
    assert wc_value(ambiguity_for(sc, 0.5, 0.1, 2.0), [3.0, 3.0, 3.0])[0] == pytest.approx(3.0)


def test_worst_case_tight_two_point_between_extremes():
    sc = ScenarioSet.equiprobable(np.array([[[2.0]], [[6.0]]]))
    value, _ = wc_value(ambiguity_for(sc), [1.0, 5.0])
    assert 1.0 - 1e-9 <= value <= 5.0 + 1e-9
    assert value == pytest.approx(3.0)


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 5000), I=st.integers(1, 3), J=st.integers(1, 2), T=st.integers(1, 2),
       W=st.integers(1, 3))
def test_smip_solutions_satisfy_invariants(seed, I, J, T, W):
    inst = random_instance(seed, I, J, T)
    model = build_extensive_smip(inst, random_scenarios(seed, J, T, W))
    sol = opt(model)
    assert check_solution_invariants(model, sol.x) == []
    h = model.value(sol.x, "h")
    x = model.value(sol.x, "x")
    assert np.all(h <= inst.dc_capacity_limit[:, None] * x[:, None] + 1e-6)
    assert np.all(h.sum(axis=0) <= inst.temporal_budget + 1e-6)


def test_build_errors_on_dimension_mismatch():
    with pytest.raises(BuildError):
        build_extensive_smip(random_instance(0), random_scenarios(0, J=3))
