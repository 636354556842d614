"""Outcome conversions: BMI, total weight loss (TWL), excess weight loss (EWL).

A 150 kg, 1.80 m patient who reaches 105 kg lost 30% of total weight; the same
loss expressed against the excess above BMI 25 is about 65%.  TWL is
positive-for-loss so visit weights reconstruct as preop * (1 - TWL/100).
"""

import numpy as np

from baritraj.outcomes import compute_bmi, compute_ewl, compute_twl, twl_to_weight

preop_weight, height = 150.0, 1.80
visit_weight = 105.0

bmi0 = compute_bmi(preop_weight, height)
bmi12 = compute_bmi(visit_weight, height)
twl = compute_twl(preop_weight, visit_weight)
ewl = compute_ewl(bmi0, bmi12)

print(f"baseline: {preop_weight:.0f} kg at {height:.2f} m -> BMI {bmi0:.2f}")
print(f"month 12: {visit_weight:.0f} kg -> BMI {bmi12:.2f}")
print(f"TWL {twl:.1f}%   EWL {ewl:.1f}%")

reconstructed = twl_to_weight(preop_weight, twl)
print(f"reconstructed weight from TWL: {reconstructed:.6f} kg")

rng = np.random.default_rng(0)
w = rng.uniform(40, 400, size=100_000)
v = rng.uniform(30, 390, size=100_000)
err = np.max(np.abs(twl_to_weight(w, compute_twl(w, v)) - v) / v)
print(f"round-trip worst relative error over 1e5 random pairs: {err:.2e}")

print("\nweight gain shows up as negative TWL:")
print(f"  100 kg -> 113.3 kg gives TWL {compute_twl(100, 113.3):.1f}%")
