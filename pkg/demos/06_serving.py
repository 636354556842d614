"""The prediction service end to end: train, save the artifact, serve it
in-process, and exercise the calculator's request/response contract.

(`baritraj serve --model model.json` runs the same app over HTTP; this demo
drives it with a test client so it works without opening a port.)
"""

import json
import tempfile

from fastapi.testclient import TestClient

from baritraj.cohort import PROFILE_FEATURES
from baritraj.service import create_app
from baritraj.synth import GeneratorSpec, generate_cohort
from baritraj.trajectory import save_model, train_trajectory_model

cohort = generate_cohort(GeneratorSpec(n=2000, seed=51))
model, _ = train_trajectory_model(cohort, PROFILE_FEATURES, seed=51)

with tempfile.NamedTemporaryFile(suffix=".json", mode="w", delete=False) as fh:
    artifact_path = fh.name
save_model(model, artifact_path)
print(f"artifact written to {artifact_path}")

client = TestClient(create_app(artifact_path))

meta = client.get("/api/v1/meta").json()
print("\nGET /api/v1/meta ->", json.dumps(meta, indent=1))

scenario = {
    "age_years": 30, "weight_kg": 150, "height_m": 1.80, "smoker": False,
    "diabetes_status": "none", "diabetes_duration_years": 0.0, "operation": "RYGB",
}
request = {"scenarios": [scenario, {**scenario, "operation": "SG"}], "units": "kg"}
response = client.post("/api/v1/predict", json=request).json()
print("\nPOST /api/v1/predict (two scenarios, kg): timepoint predictions")
for label, payload in zip(("RYGB", "SG"), response["scenarios"]):
    points = ", ".join(f"m{int(p['month'])}={p['value']:.1f}" for p in payload["points"])
    print(f"  {label}: {points}")

bad = client.post("/api/v1/predict", json={"scenarios": [{**scenario, "age_years": 17}], "units": "kg"})
print(f"\nvalidation: age 17 -> HTTP {bad.status_code}: {bad.json()['detail']}")

slim = {**scenario, "weight_kg": 80}
ewl = client.post("/api/v1/predict", json={"scenarios": [slim], "units": "ewl"})
print(f"EWL with baseline BMI <= 25 -> HTTP {ewl.status_code}")
