"""Validation statistics: error summaries with BCa bootstrap intervals,
Bland-Altman agreement, rank tests, and the published-style comparison tables.

Trains on one synthetic cohort and validates against a second, independently
generated one, standing in for the external-cohort validation design.
"""

import numpy as np

from baritraj.cohort import PROFILE_FEATURES
from baritraj.metrics import (
    bca_interval,
    bland_altman,
    evaluate_cohort,
    kruskal_wallis,
    mann_whitney_u,
    render_table2,
    render_table3,
)
from baritraj.outcomes import compute_bmi, compute_twl, twl_to_weight
from baritraj.synth import GeneratorSpec, generate_cohort
from baritraj.trajectory import train_trajectory_model
from baritraj.tree import tree_predict

train_cohort = generate_cohort(GeneratorSpec(n=4000, seed=41))
model, _ = train_trajectory_model(train_cohort, PROFILE_FEATURES, seed=41)
external = generate_cohort(GeneratorSpec(n=1500, seed=42))

report = evaluate_cohort(model, external, seed=1, B=2000, label="synthetic external")
print(render_table2([report]))
print(render_table3(report))

rows = external.profile_rows()
idx, _ = external.twl_at(60)
pred_bmi, obs_bmi = [], []
for i in idx:
    r = external.records[i]
    twl_hat = tree_predict(model.trees[60], rows[i])
    pred_bmi.append(compute_bmi(twl_to_weight(r.weight_kg, twl_hat), r.height_m))
    obs_bmi.append(compute_bmi(r.visit_at(60).weight_kg, r.height_m))
ba = bland_altman(pred_bmi, obs_bmi)
print(f"Bland-Altman at 5 years: bias {ba.bias:+.2f} kg/m2 (sd {ba.sd:.2f}), "
      f"limits of agreement [{ba.loa_lo:.2f}, {ba.loa_hi:.2f}]")

interval = bca_interval(np.asarray(obs_bmi) - np.asarray(pred_bmi),
                        lambda e: float(np.median(np.abs(e))), B=2000, seed=7)
print(f"MAD BMI {interval.estimate:.2f} kg/m2, BCa 95% CI [{interval.lo:.2f}, {interval.hi:.2f}]")

by_op = {
    op: [compute_twl(external.records[i].weight_kg, external.records[i].visit_at(60).weight_kg)
         for i in idx if external.records[i].operation == op]
    for op in ("RYGB", "SG", "AGB")
}
mw = mann_whitney_u(by_op["RYGB"], by_op["SG"])
kw = kruskal_wallis(list(by_op.values()))
print(f"\n5-year TWL, RYGB vs SG: Mann-Whitney U={mw.statistic:.0f}, p={mw.p_value:.2e}")
print(f"5-year TWL across operations: Kruskal-Wallis H={kw.statistic:.1f}, p={kw.p_value:.2e}")
