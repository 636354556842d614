"""Interpretable trees and banded trajectories.

Grows the per-timepoint regression trees, prints the month-60 tree (operation
first, then diabetes/age strata), and compares two what-if scenarios the way
the calculator does: same patient under gastric bypass versus gastric banding.
"""

import numpy as np

from baritraj.cohort import PROFILE_FEATURES
from baritraj.synth import GeneratorSpec, generate_cohort
from baritraj.trajectory import PatientProfile, predict_profile, train_trajectory_model
from baritraj.tree import render_tree

cohort = generate_cohort(GeneratorSpec(n=4000, seed=31))
model, report = train_trajectory_model(cohort, PROFILE_FEATURES, seed=31)

print("=== month-60 tree ===")
print(render_tree(model.trees[60]))
print()
print(report.render())

base = dict(age_years=30, weight_kg=150, height_m=1.80, smoker=False,
            diabetes_status="none", diabetes_duration_years=0.0)
scenarios = {
    "RYGB": predict_profile(model, PatientProfile(operation="RYGB", **base)),
    "AGB": predict_profile(model, PatientProfile(operation="AGB", **base)),
}

print("\npredicted weight (kg) with interquartile band:")
print("month   " + "".join(f"{name:>22}" for name in scenarios))
for i, month in enumerate([0, 1, 3, 12, 24, 60]):
    cells = []
    for prediction in scenarios.values():
        view = prediction.view("kg")
        p = view.points[i]
        cells.append(f"{p.value:7.1f} [{p.lo:6.1f},{p.hi:6.1f}]")
    print(f"{month:>5}   " + "  ".join(cells))

rygb = scenarios["RYGB"].view("twl")
print("\nsmoothed TWL curve (RYGB), every 6 months:")
idx = [int(round(m / 0.25)) for m in range(0, 61, 6)]
print("  months:", [int(rygb.curve_months[i]) for i in idx])
print("  twl%:  ", [round(float(rygb.curve[i]), 1) for i in idx])
