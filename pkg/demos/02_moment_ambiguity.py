# coding: utf-8

# # Planning against a family of distributions
#
# Instead of trusting the sampled scenarios, the robust model lets the
# probabilities move as long as the first and second moments stay inside a
# band. Widening the band can only make the worst case worse.

import numpy as np

from pandist import (build_ambiguity_bounds, build_dro_milp, build_extensive_smip,
                     dro_worst_case_part, empirical_moments, solve_milp, worst_case_expectation,
                     worst_case_expectation_dual)
from pandist.io import ExperimentConfig, prepare_experiment

cfg = ExperimentConfig(scale=0.001, in_count=12, in_seed=3, out_count=50, out_seed=4)
prep = prepare_experiment(cfg)
inst, support = prep.instance, prep.scenarios_in
moments = empirical_moments(support)

print(inst.n_dcs, "DC sites,", inst.n_sites, "regions,", inst.n_periods, "periods")
print("preopened:", [s.id for s, st in zip(inst.dc_sites, inst.dc_status) if st == "preopened"])

# %%
sp = solve_milp(build_extensive_smip(inst, support))
print("SP optimum:", round(sp.objective, 2))

for hi in (1.5, 2.0, 4.0):
    spec = build_ambiguity_bounds(moments, 0.5, 0.1, hi, support)
    model = build_dro_milp(inst, spec)
    sol = solve_milp(model)
    h = model.value(sol.x, "h")
    wc = worst_case_expectation(inst, h, spec)
    print(f"second-moment factor {hi}: DRO {sol.objective:,.2f}, "
          f"worst-case recourse {wc.value:,.2f} (MILP part {dro_worst_case_part(model, sol.x):,.2f})")

# %% [markdown]
# The worst-case expectation is an LP in the probabilities; its dual gives
# the moment multipliers. Both should agree to rounding.

# %%
g = wc.g
dual = worst_case_expectation_dual(inst, h, spec, g=g)
print("primal", wc.value, "dual", dual.value)
print("mass on the worst scenarios:", np.round(np.sort(wc.p)[::-1][:4], 3))
