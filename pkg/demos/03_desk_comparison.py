# coding: utf-8

# # Ten regions, three planning approaches
#
# The packaged desk configuration scales the first-phase vaccine demand
# down by 1000, draws 30 in-sample and 200 out-of-sample scenarios, and
# compares the mean-value plan, the stochastic plan and the robust plan on
# the held-out scenarios.

import tempfile
from pathlib import Path

from pandist import apply_scarcity, compare_approaches
from pandist.io import builtin_path, format_money, load_config, prepare_experiment, run_experiment

cfg = load_config(builtin_path("us_phase1_desk.json"))
out = Path(tempfile.mkdtemp(prefix="pandist-desk-"))
res = run_experiment(cfg, out)

for row in res.comparison.table():
    print(f"{row['approach']:>4}: total {format_money(row['total']):>8} "
          f"(+{row['pct_over_best']:.1f}%), unmet {row['unmet_mean']:.1f}, "
          f"{row['open_dcs']} DCs")
print("CSV reports in", out)
print((out / "breakdown.csv").read_text())

# %% [markdown]
# When the budget covers well under half of expected demand, every plan
# ships at the budget and the approaches become hard to tell apart.

# %%
prep = prepare_experiment(cfg.replace(in_count=20, out_count=100))
scarce = apply_scarcity(prep.instance, 0.04)
comp = compare_approaches(scarce, prep.scenarios_in, prep.scenarios_out, prep.ambiguity,
                          mean_demand=prep.nominal.mean)
for r in comp.rows:
    print(r.approach, "unmet", round(r.evaluation.unmet_mean, 1), "total", format_money(r.total))
