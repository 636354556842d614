"""baritraj: interpretable 5-year weight-trajectory prediction after bariatric surgery.

Core surfaces: outcome formulas (:mod:`baritraj.outcomes`), the longitudinal
cohort model (:mod:`baritraj.cohort`), predictive-mean-matching imputation
(:mod:`baritraj.impute`), LASSO selection (:mod:`baritraj.lasso`), CART trees
with surrogate splits (:mod:`baritraj.tree`), the trajectory model and its
artifact (:mod:`baritraj.trajectory`), validation metrics
(:mod:`baritraj.metrics`), the synthetic generator (:mod:`baritraj.synth`),
the training pipeline (:mod:`baritraj.pipeline`), and the HTTP service
(:mod:`baritraj.service`).
"""

from .cohort import Cohort, PatientRecord, VisitRecord, load_cohort
from .outcomes import compute_bmi, compute_ewl, compute_twl, twl_to_weight
from .pipeline import PipelineConfig, run_training_pipeline
from .synth import GeneratorSpec, generate_cohort, oracle_twl
from .trajectory import (
    PatientProfile,
    TrajectoryModel,
    load_model,
    predict_profile,
    save_model,
    train_trajectory_model,
)

__version__ = "0.1.0"

__all__ = [
    "Cohort",
    "GeneratorSpec",
    "PatientProfile",
    "PatientRecord",
    "PipelineConfig",
    "TrajectoryModel",
    "VisitRecord",
    "compute_bmi",
    "compute_ewl",
    "compute_twl",
    "generate_cohort",
    "load_cohort",
    "load_model",
    "oracle_twl",
    "predict_profile",
    "run_training_pipeline",
    "save_model",
    "train_trajectory_model",
    "twl_to_weight",
    "__version__",
]
