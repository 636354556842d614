"""Regenerate the committed test fixtures: the small trained model artifact and
the golden service responses (also copied into the frontend's test fixtures).

Run from the repository root:

    python3 tests/make_goldens.py
"""

import json
import pathlib

from fastapi.testclient import TestClient

from baritraj.cohort import PROFILE_FEATURES
from baritraj.service import create_app
from baritraj.synth import GeneratorSpec, generate_cohort
from baritraj.trajectory import save_model, train_trajectory_model

DATA = pathlib.Path(__file__).parent / "data"

FIGURE_SCENARIO = {
    "age_years": 30,
    "weight_kg": 150,
    "height_m": 1.80,
    "smoker": False,
    "diabetes_status": "none",
    "diabetes_duration_years": 0.0,
    "operation": "RYGB",
}

GOLDEN_REQUESTS = {
    "golden_predict_kg.json": {"scenarios": [FIGURE_SCENARIO], "units": "kg"},
    "golden_predict_two_scenarios_bmi.json": {
        "scenarios": [FIGURE_SCENARIO, {**FIGURE_SCENARIO, "operation": "SG"}],
        "units": "bmi",
    },
    "golden_predict_twl.json": {"scenarios": [FIGURE_SCENARIO], "units": "twl"},
}


def main():
    DATA.mkdir(exist_ok=True)
    cohort = generate_cohort(GeneratorSpec(n=800, seed=21))
    model, _ = train_trajectory_model(
        cohort, PROFILE_FEATURES, seed=5, created_at="2000-01-01T00:00:00Z"
    )
    save_model(model, DATA / "model.json")

    client = TestClient(create_app(str(DATA / "model.json")))
    for name, request in GOLDEN_REQUESTS.items():
        response = client.post("/api/v1/predict", json=request)
        response.raise_for_status()
        doc = {"request": request, "response": response.json()}
        (DATA / name).write_text(json.dumps(doc, indent=1, sort_keys=True))
        print(f"wrote {DATA / name}")
    meta = client.get("/api/v1/meta").json()
    (DATA / "golden_meta.json").write_text(json.dumps(meta, indent=1, sort_keys=True))
    print(f"wrote {DATA / 'golden_meta.json'}")


if __name__ == "__main__":
    main()
