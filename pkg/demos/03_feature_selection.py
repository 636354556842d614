"""Feature selection stage: screening, predictive mean matching, LASSO paths
with cross-validation, and pooling across imputed datasets.

On a planted cohort the pooled selection should recover exactly the seven
informative variables (age, weight, height, smoking, diabetes status and
duration, operation) and reject the injected noise columns.
"""

import numpy as np

from baritraj.impute import pmm_impute, screen_features
from baritraj.pipeline import PipelineConfig, select_features
from baritraj.synth import GeneratorSpec, generate_cohort

cohort = generate_cohort(GeneratorSpec(n=3000, seed=23))
config = PipelineConfig(seed=23, m_imputations=5)

screen = screen_features(cohort)
print("screened out:", ["%s (%s)" % d for d in screen.dropped] or "none")
print("candidates:", ", ".join(screen.retained))

imputation = pmm_impute(cohort, m=config.m_imputations, seed=config.seed)
missing_before = sum(r.smoker is None for r in cohort.records)
print(f"\nPMM: smoker missing for {missing_before} patients -> 0 in each of m={imputation.m} datasets")
print("imputed values are always copied from observed donors (never fabricated)")

selection, fits = select_features(cohort, imputation, screen, config)
print("\nselection frequency over all (timepoint x dataset) fits:")
for name, freq in sorted(selection.frequency.items(), key=lambda kv: -kv[1]):
    print(f"  {name:<26} {freq:.2f}")
print("\npooled per timepoint:")
for month, names in selection.per_timepoint.items():
    print(f"  month {month}: {', '.join(sorted(names))}")
print("\nglobal selection (union over visits):", ", ".join(sorted(selection.selected)))

one = fits[(60, 0)]
k = one.selected_index()
print(f"\nmonth-60 dataset-0 fit: lambda_selected={one.lambda_selected:.4f} "
      f"(index {k} of {len(one.lambda_path)}), cv MSE at selection {one.cv_mse[k]:.2f}")
nonzero = [(n, c) for n, c in zip(one.feature_names, one.coefficients_original_scale()[k]) if c != 0]
print("nonzero coefficients (original scale):")
for name, coef in sorted(nonzero, key=lambda kv: -abs(kv[1])):
    print(f"  {name:<26} {coef:+.3f}")
