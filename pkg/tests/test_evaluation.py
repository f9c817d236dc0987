import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pandist import (CANDIDATE, FORBIDDEN, PREOPENED, InputError, ScenarioSet, apply_dc_policy,
                     apply_scarcity, build_ambiguity_bounds, build_extensive_smip,
                     check_first_stage, compare_approaches, empirical_moments,
                     out_of_sample_evaluate, solve_approach, solve_milp)
from pandist.evaluation import PERCENTILES

from factories import random_instance, random_scenarios


@pytest.mark.parametrize("seed", range(4))
def test_in_sample_total_equals_sp_objective(seed):
    inst = random_instance(seed)
    sc = random_scenarios(seed, W=3)
    plan = solve_approach(inst, "sp", sc, gap_tol=0.0)
    ev = out_of_sample_evaluate(inst, plan.x, plan.h, sc)
    assert ev.total == pytest.approx(plan.objective, rel=1e-6)


def test_zero_demand_costs_are_first_stage_only():
    inst = random_instance(1, initial_inventory=np.zeros(2), initial_backlog=np.zeros(2))
    x = np.array([1.0, 0.0])
    h = np.array([[3.0, 2.0], [0.0, 0.0]])
    ev = out_of_sample_evaluate(inst, x, h, ScenarioSet.equiprobable(np.zeros((3, 2, 2))))
    c = ev.costs
    assert c.penalty == c.shipping == c.inventory == 0.0
    assert c.total == pytest.approx(c.operating + c.capacity)
    assert c.operating == pytest.approx(inst.operating_cost[0])
    assert c.capacity == pytest.approx(inst.capacity_unit_cost[0] * 5.0)


def test_no_capacity_closed_form_backlog():
    inst = random_instance(2, 1, 1, 2, initial_inventory=[0.0], initial_backlog=[1.5])
    d = np.array([[[2.0, 3.0]], [[4.0, 0.0]]])
    ev = out_of_sample_evaluate(inst, np.zeros(1), np.zeros((1, 2)), ScenarioSet.equiprobable(d))
    cu = inst.penalty_unit_cost[0]
    expect = np.mean([cu[0] * (1.5 + w[0, 0]) + cu[1] * (1.5 + w[0, 0] + w[0, 1]) for w in d])
    assert ev.costs.penalty == pytest.approx(expect)
    assert ev.unmet.tolist() == pytest.approx([6.5, 5.5])
    assert ev.unmet_mean == pytest.approx(6.0)


def test_infeasible_first_stage_names_constraint():
    inst = random_instance(3)
    with pytest.raises(InputError, match="capacity_link"):
        check_first_stage(inst, np.zeros(2), np.ones((2, 2)))
    big = np.full((2, 2), inst.dc_capacity_limit.min())
    with pytest.raises(InputError, match="budget"):
        check_first_stage(inst.replace(temporal_budget=[1.0, 1.0]), np.ones(2), big)
    with pytest.raises(InputError):
        out_of_sample_evaluate(inst, np.zeros(2), np.ones((2, 2)), random_scenarios(3))


def test_scarcity():
    inst = random_instance(4, temporal_budget=[100.0, 200.0])
    assert np.array_equal(apply_scarcity(inst, 0.1).temporal_budget, [10.0, 20.0])
    assert np.array_equal(apply_scarcity(inst, 1.0).temporal_budget, inst.temporal_budget)
    for f in (0.3, 0.2):
        assert np.array_equal(apply_scarcity(inst, f).temporal_budget, f * inst.temporal_budget)
    for bad in (0.0, 1.5, -1.0):
        with pytest.raises(InputError):
            apply_scarcity(inst, bad)


def test_dc_policies():
    inst = random_instance(5, 7, 2, 2)
    pre = ["dc0", "dc2", "dc3", "dc5", "dc6"]
    strict = apply_dc_policy(inst, "most_restrictive", pre)
    assert strict.dc_status.count(PREOPENED) == 5 and CANDIDATE not in strict.dc_status
    assert strict.dc_status.count(FORBIDDEN) == 2
    best = apply_dc_policy(inst, "best_case", pre)
    assert set(best.dc_status) == {CANDIDATE}
    assert apply_dc_policy(inst, "default", []).dc_status == best.dc_status
    with pytest.raises(InputError):
        apply_dc_policy(inst, "default", ["nowhere"])


@pytest.mark.parametrize("seed", range(3))
def test_policy_nesting(seed):
    inst = random_instance(seed, 3, 2, 2)
    sc = random_scenarios(seed, W=3)
    pre = ["dc1"]
    vals = [solve_approach(apply_dc_policy(inst, p, pre), "sp", sc, gap_tol=0.0).objective
            for p in ("best_case", "default", "most_restrictive")]
    assert vals[0] <= vals[1] + 1e-7 <= vals[2] + 2e-7


def test_point_mass_comparison_all_equal():
    inst = random_instance(6)
    sc = random_scenarios(6, W=1)
    amb = build_ambiguity_bounds(empirical_moments(sc), 0.0, 1.0, 1.0, sc)
    comp = compare_approaches(inst, sc, sc, amb, gap_tol=0.0)
    totals = [r.total for r in comp.rows]
    assert max(totals) - min(totals) <= 1e-6 * (1 + abs(min(totals)))
    assert all(r.pct_over_best == pytest.approx(0.0, abs=1e-4) for r in comp.rows)
    assert [r["approach"] for r in comp.table()] == ["dt", "sp", "dro"]


@pytest.mark.parametrize("seed", range(3))
def test_decomposition_exact(seed):
    inst = random_instance(seed, 2, 2, 3)
    sc = random_scenarios(seed, 2, 3, W=4)
    model = build_extensive_smip(inst, sc)
    sol = solve_milp(model, gap_tol=0.0)
    x, h = model.value(sol.x, "x"), model.value(sol.x, "h")
    ev = out_of_sample_evaluate(inst, x, h, sc)
    first = inst.operating_cost @ x + np.sum(inst.capacity_cost_matrix() * h)
    assert first + sc.probabilities @ ev.recourse == pytest.approx(sol.objective, rel=1e-6)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 5000), field=st.sampled_from(["operating_cost", "capacity_unit_cost",
       "shipping_unit_cost", "inventory_unit_cost", "penalty_unit_cost"]), bump=st.floats(0, 5))
def test_costs_dominance(seed, field, bump):
    inst = random_instance(seed)
    sc = random_scenarios(seed, W=3)
    x = np.ones(2)
    h = np.minimum(inst.dc_capacity_limit[:, None], inst.temporal_budget[None, :] / 2)
    base = out_of_sample_evaluate(inst, x, h, sc).total
    raised = inst.replace(**{field: getattr(inst, field) + bump})
    assert out_of_sample_evaluate(raised, x, h, sc).total >= base - 1e-7


def test_breakdown_invariants():
    inst = random_instance(8, 2, 3, 2)
    sc = random_scenarios(8, 3, 2, W=20)
    plan = solve_approach(inst, "sp", sc)
    ev = out_of_sample_evaluate(inst, plan.x, plan.h, sc)
    row = ev.summary_row("sp")
    assert row["total"] == pytest.approx(sum(ev.costs.as_dict()[k] for k in
                                            ("operating", "capacity", "shipping", "inventory", "penalty")))
    qs = [ev.unmet_percentiles[q] for q in PERCENTILES]
    assert qs == sorted(qs)
    assert ev.unmet.min() - 1e-12 <= qs[0] and qs[-1] <= ev.unmet.max() + 1e-12
    assert np.all((ev.regional_unmet_pct >= 0) & (ev.regional_unmet_pct <= 100))
    assert np.all(ev.backlog_periods >= ev.unmet - 1e-9)
