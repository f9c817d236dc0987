# coding: utf-8

# # A two-DC, two-region toy network
#
# Two candidate distribution centres serve two regions over two periods.
# We solve the stochastic model on a handful of demand scenarios, then look
# at what one of those scenarios costs once the capacities are fixed.

import numpy as np

from pandist import (CANDIDATE, Instance, ScenarioSet, build_extensive_smip, second_stage_cost,
                     second_stage_dual, solve_milp)

inst = Instance(
    dc_sites=["north", "south"],
    demand_sites=["city", "county"],
    n_periods=2,
    operating_cost=[40.0, 25.0],
    capacity_unit_cost=[1.0, 1.4],
    shipping_unit_cost=np.array([[[0.2, 0.2], [0.9, 0.9]],
                                 [[0.8, 0.8], [0.3, 0.3]]]),
    inventory_unit_cost=np.full((2, 2), 0.1),
    penalty_unit_cost=np.full((2, 2), 12.0),
    dc_capacity_limit=[20.0, 15.0],
    temporal_budget=[30.0, 30.0],
    initial_inventory=[0.0, 0.0],
    initial_backlog=[0.0, 0.0],
    dc_status=[CANDIDATE, CANDIDATE],
    name="toy",
)

# Three equally likely demand paths, (scenario, region, period).
demand = np.array([
    [[8.0, 10.0], [4.0, 6.0]],
    [[12.0, 9.0], [7.0, 3.0]],
    [[5.0, 14.0], [9.0, 9.0]],
])
scenarios = ScenarioSet.equiprobable(demand)

# %%
model = build_extensive_smip(inst, scenarios)
print(model.n_vars, "variables,", model.n_rows, "constraints")

sol = solve_milp(model)
x = model.value(sol.x, "x")
h = model.value(sol.x, "h")
print("status:", sol.status, "after", sol.nodes, "nodes")
print("open:", x)
print("capacity per period:\n", h.round(3))
print("expected cost:", round(sol.objective, 4))

# %% [markdown]
# With h fixed, every scenario is just a small LP. Solving its dual
# separately should land on the same number.

# %%
xi = demand[1]
primal = second_stage_cost(inst, h, xi)
dual = second_stage_dual(inst, h, xi)
print("recourse cost, primal:", round(primal.objective, 6), " dual:", round(dual.objective, 6))
print("shadow price of capacity (theta):\n", dual.theta.round(3))
print("backlog:\n", primal.u.round(3))

# The LP text is handy for cross-checking against another solver.
print(model.to_lp()[:400])
