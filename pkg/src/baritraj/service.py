"""Stateless HTTP prediction service around a trajectory-model artifact.

Endpoints:
    POST /api/v1/predict   profile scenarios -> banded, smoothed trajectories
    GET  /api/v1/meta      model feature list, timepoints, artifact hash
    GET  /healthz          liveness

Requests and responses are JSON.  Domain validation failures return 400 with
field-level messages; requesting EWL units for a baseline BMI of 25 or less
returns 422.  Nothing a client sends is stored, and the shared model is
immutable, so any interleaving of concurrent requests behaves like serial
execution.  ``ModelHolder.swap`` replaces the artifact atomically between
requests for hot reload.
"""

from __future__ import annotations

from typing import Any

from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel, ConfigDict

from .trajectory import (
    PatientProfile,
    ProfileValidationError,
    TrajectoryModel,
    load_model,
    predict_profile,
)

UNITS = ("kg", "bmi", "twl", "ewl")
MAX_SCENARIOS = 2


class ProfileBody(BaseModel):
    model_config = ConfigDict(extra="forbid")

    age_years: float
    weight_kg: float
    height_m: float
    smoker: bool | None = None
    diabetes_status: str = "none"
    diabetes_duration_years: float = 0.0
    operation: str


class PredictBody(BaseModel):
    model_config = ConfigDict(extra="forbid")

    scenarios: list[ProfileBody]
    units: str = "kg"


class ModelHolder:
    """Atomic reference to the served model plus its artifact hash."""

    def __init__(self, model: TrajectoryModel):
        self._state = (model, model.checksum())

    def swap(self, model: TrajectoryModel) -> None:
        self._state = (model, model.checksum())

    @property
    def model(self) -> TrajectoryModel:
        return self._state[0]

    @property
    def checksum(self) -> str:
        return self._state[1]


def _field_errors(errors: list[tuple[str, str]], scenario: int) -> list[dict]:
    return [{"scenario": scenario, "field": f, "message": m} for f, m in errors]


def _scenario_payload(model: TrajectoryModel, profile: PatientProfile, units: str) -> dict:
    prediction = predict_profile(model, profile)
    view = prediction.view(units)
    return {
        "points": [
            {"month": p.month, "value": p.value, "lo": p.lo, "hi": p.hi} for p in view.points
        ],
        "curve": {
            "months": [float(m) for m in view.curve_months],
            "value": [float(v) for v in view.curve],
            "lo": [float(v) for v in view.curve_lo],
            "hi": [float(v) for v in view.curve_hi],
        },
        "ewl_available": prediction.ewl_available,
    }


def create_app(model: TrajectoryModel | str, cors_origins: list[str] | None = None) -> FastAPI:
    """Build the service around a loaded model or an artifact path."""
    if not isinstance(model, TrajectoryModel):
        model = load_model(model)
    holder = ModelHolder(model)

    app = FastAPI(title="baritraj prediction service")
    app.state.holder = holder
    if cors_origins:
        app.add_middleware(
            CORSMiddleware, allow_origins=list(cors_origins), allow_methods=["*"], allow_headers=["*"]
        )

    @app.get("/healthz")
    def healthz() -> dict:
        return {"status": "ok"}

    @app.get("/api/v1/meta")
    def meta() -> dict:
        m = holder.model
        return {
            "format_version": m.metadata.get("format_version"),
            "features": list(m.feature_names()),
            "timepoints": list(m.timepoints),
            "model_hash": holder.checksum,
        }

    @app.post("/api/v1/predict")
    def predict(body: PredictBody) -> dict[str, Any]:
        if body.units not in UNITS:
            raise HTTPException(400, detail=[{"field": "units", "message": f"must be one of {', '.join(UNITS)}"}])
        if not (1 <= len(body.scenarios) <= MAX_SCENARIOS):
            raise HTTPException(
                400, detail=[{"field": "scenarios", "message": f"provide 1 to {MAX_SCENARIOS} scenarios"}]
            )
        profiles = []
        for i, s in enumerate(body.scenarios):
            profile = PatientProfile(
                age_years=s.age_years,
                weight_kg=s.weight_kg,
                height_m=s.height_m,
                smoker=s.smoker,
                diabetes_status=s.diabetes_status,
                diabetes_duration_years=s.diabetes_duration_years,
                operation=s.operation,
            )
            errors = profile.validate()
            if errors:
                raise HTTPException(400, detail=_field_errors(errors, i))
            profiles.append(profile)
        if body.units == "ewl":
            for i, profile in enumerate(profiles):
                if profile.baseline_bmi <= 25.0:
                    raise HTTPException(
                        422,
                        detail=[{
                            "scenario": i,
                            "field": "units",
                            "message": "EWL is undefined for baseline BMI <= 25",
                        }],
                    )
        m = holder.model
        return {
            "units": body.units,
            "model": {
                "format_version": m.metadata.get("format_version"),
                "features": list(m.feature_names()),
                "model_hash": holder.checksum,
            },
            "scenarios": [_scenario_payload(m, p, body.units) for p in profiles],
        }

    return app
