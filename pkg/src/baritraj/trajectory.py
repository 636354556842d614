"""Per-timepoint trees assembled into one 5-year trajectory predictor.

A trained model holds one regression tree per scheduled month (response: TWL
percent), the 25th/75th percentiles of its training residuals per month (the
prediction-interval band), and metadata.  Predictions anchor at month 0 with
zero loss, carry the residual-quantile band, and are smoothed with a
shape-preserving monotone piecewise-cubic interpolant so curves never
overshoot between knots.  Unit views (kg, BMI, EWL) are derived pointwise
from the smoothed TWL curve.

The serialized artifact is a single JSON document: format version, metadata,
nested tree records, and residual quantiles, with a SHA-256 checksum over the
canonically ordered payload.  Field ordering is stable for diffability.
"""

from __future__ import annotations

import hashlib
import json
import os
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import PchipInterpolator

from .cohort import (
    Cohort,
    DIABETES_LEVELS,
    OPERATIONS,
    PROFILE_FEATURES,
    SCHEDULED_MONTHS,
    PatientRecord,
    profile_row,
)
from .metrics import MetricReport, evaluate_cohort, mad as mad_metric, rmse as rmse_metric
from .outcomes import compute_bmi, compute_ewl, twl_to_weight
from .tree import (
    CpEntry,
    RegressionTree,
    SplitRule,
    TreeNode,
    TreeParams,
    grow_tree,
    tree_predict,
)

FORMAT_VERSION = 1
CURVE_STEP = 0.25


class ProfileValidationError(ValueError):
    """Raised for invalid prediction inputs; carries per-field messages."""

    def __init__(self, errors: list[tuple[str, str]]):
        self.errors = errors
        super().__init__("; ".join(f"{f}: {m}" for f, m in errors))


@dataclass(frozen=True)
class PatientProfile:
    """The seven preoperative inputs of the prediction model."""

    age_years: float
    weight_kg: float
    height_m: float
    smoker: bool | None
    diabetes_status: str
    diabetes_duration_years: float
    operation: str

    def validate(self) -> list[tuple[str, str]]:
        errors = []
        if not (18.0 <= self.age_years):
            errors.append(("age_years", "age must be at least 18 years"))
        if not (40.0 <= self.weight_kg <= 400.0):
            errors.append(("weight_kg", "weight must be within 40-400 kg"))
        if not (1.0 < self.height_m < 2.5):
            errors.append(("height_m", "height must be within 1.0-2.5 m"))
        if self.diabetes_status not in DIABETES_LEVELS:
            errors.append(("diabetes_status", f"must be one of {', '.join(DIABETES_LEVELS)}"))
        if self.diabetes_duration_years < 0:
            errors.append(("diabetes_duration_years", "duration cannot be negative"))
        elif self.diabetes_status != "t2d" and self.diabetes_duration_years != 0:
            errors.append(("diabetes_duration_years", "duration must be 0 unless diabetes_status is t2d"))
        if self.operation not in OPERATIONS:
            errors.append(("operation", f"must be one of {', '.join(OPERATIONS)}"))
        return errors

    def require_valid(self):
        errors = self.validate()
        if errors:
            raise ProfileValidationError(errors)

    @property
    def baseline_bmi(self) -> float:
        return compute_bmi(self.weight_kg, self.height_m)


@dataclass(frozen=True)
class TrajectoryModel:
    timepoints: tuple[int, ...]
    trees: dict[int, RegressionTree]
    residual_quantiles: dict[int, tuple[float, float]]  # month -> (q25, q75)
    metadata: dict

    def feature_names(self) -> tuple[str, ...]:
        return tuple(self.metadata.get("feature_set", PROFILE_FEATURES))

    def checksum(self) -> str:
        return _payload_checksum(_model_payload(self))


@dataclass(frozen=True)
class TrajectoryPoint:
    month: float
    twl: float
    twl_lo: float
    twl_hi: float


@dataclass(frozen=True)
class ViewPoint:
    month: float
    value: float
    lo: float
    hi: float


@dataclass(frozen=True)
class UnitView:
    """A trajectory re-expressed in one display unit, band order preserved."""

    points: tuple[ViewPoint, ...]
    curve_months: np.ndarray
    curve: np.ndarray
    curve_lo: np.ndarray
    curve_hi: np.ndarray


@dataclass(frozen=True)
class TrajectoryPrediction:
    profile: PatientProfile
    points: tuple[TrajectoryPoint, ...]  # anchored at month 0
    curve_months: np.ndarray
    curve_twl: np.ndarray
    curve_twl_lo: np.ndarray
    curve_twl_hi: np.ndarray

    @property
    def ewl_available(self) -> bool:
        return self.profile.baseline_bmi > 25.0

    def view(self, units: str) -> UnitView:
        """Convert the TWL trajectory into kg, BMI, TWL, or EWL units.

        Larger TWL means lower weight, so the kg and BMI bands flip lo/hi
        relative to the TWL band; EWL is increasing in TWL and keeps it.
        """
        w0, h = self.profile.weight_kg, self.profile.height_m
        b0 = self.profile.baseline_bmi

        if units == "twl":
            convert, flip = (lambda t: t), False
        elif units == "kg":
            convert, flip = (lambda t: twl_to_weight(w0, t)), True
        elif units == "bmi":
            convert, flip = (lambda t: compute_bmi(twl_to_weight(w0, t), h)), True
        elif units == "ewl":
            if not self.ewl_available:
                raise ValueError("EWL view unavailable: baseline BMI must exceed 25")
            convert, flip = (lambda t: compute_ewl(b0, compute_bmi(twl_to_weight(w0, t), h))), False
        else:
            raise ValueError(f"unknown units {units!r}")

        def pt(p: TrajectoryPoint) -> ViewPoint:
            v, a, b = convert(p.twl), convert(p.twl_lo), convert(p.twl_hi)
            lo, hi = (b, a) if flip else (a, b)
            return ViewPoint(p.month, v, lo, hi)

        lo_src, hi_src = (self.curve_twl_hi, self.curve_twl_lo) if flip else (self.curve_twl_lo, self.curve_twl_hi)
        return UnitView(
            tuple(pt(p) for p in self.points),
            self.curve_months,
            convert(self.curve_twl),
            convert(lo_src),
            convert(hi_src),
        )


def compute_prediction_intervals(residuals) -> tuple[float, float]:
    """Empirical 25th/75th percentiles (linear interpolation) of residuals."""
    r = np.asarray(residuals, dtype=float)
    if len(r) == 0:
        raise ValueError("cannot compute prediction intervals from no residuals")
    return float(np.percentile(r, 25)), float(np.percentile(r, 75))


def smooth_trajectory(months, values, step: float = CURVE_STEP):
    """Dense shape-preserving monotone piecewise-cubic samples through the knots.

    Requires at least 2 strictly increasing months including month 0.  The
    interpolant reproduces knots exactly and stays within the bounding values
    of each knot interval (no overshoot past the nadir).
    """
    m = np.asarray(months, dtype=float)
    v = np.asarray(values, dtype=float)
    if len(m) < 2:
        raise ValueError("smoothing requires at least 2 points")
    if len(np.unique(m)) != len(m):
        raise ValueError("duplicate months in trajectory")
    if np.any(np.diff(m) <= 0):
        raise ValueError("months must be strictly increasing")
    if m[0] != 0:
        raise ValueError("trajectory must include the month-0 anchor")
    grid = np.arange(0.0, m[-1] + step / 2, step)
    curve = PchipInterpolator(m, v)(grid)
    # snap grid points that coincide with knots: the piecewise evaluation of
    # the terminal knot goes through the last cubic and can be off by an ulp
    hits = np.searchsorted(grid, m)
    exact = (hits < len(grid)) & (grid[np.minimum(hits, len(grid) - 1)] == m)
    curve[hits[exact]] = v[exact]
    return grid, curve


def train_trajectory_model(
    cohort: Cohort,
    selected_features,
    seed: int = 0,
    params: TreeParams | None = None,
    split: float = 0.8,
    timepoints: tuple[int, ...] = SCHEDULED_MONTHS,
    eval_B: int = 1000,
    created_at: str | None = None,
):
    """Train one tree per timepoint on a seeded 80/20 patient-level split.

    Returns (model, InternalValidationReport).  Trees use the selected
    features restricted to the seven servable profile variables; residual
    quantiles come from training-subset residuals.  A timepoint with fewer
    uncensored training rows than ``minsplit`` is an error naming it.
    """
    params = params or TreeParams()
    features_used = tuple(f for f in PROFILE_FEATURES if f in set(selected_features))
    if not features_used:
        raise ValueError("no usable profile features were selected")

    n = len(cohort)
    rng = np.random.default_rng(seed)
    order = rng.permutation(n)
    n_train = int(round(split * n))
    train_idx, test_idx = np.sort(order[:n_train]), np.sort(order[n_train:])
    train_cohort = cohort.subset(train_idx)
    test_cohort = cohort.subset(test_idx)

    table = train_cohort.feature_table()
    columns = {name: table[name] for name in features_used}
    trees: dict[int, RegressionTree] = {}
    quantiles: dict[int, tuple[float, float]] = {}
    train_rows_profiles = train_cohort.profile_rows()
    for month in timepoints:
        rows, twl = train_cohort.twl_at(month)
        if len(rows) < params.minsplit:
            raise ValueError(f"timepoint {month}: only {len(rows)} uncensored training rows (< minsplit)")
        cols_month = {name: col.with_values(col.values[rows]) for name, col in columns.items()}
        tree = grow_tree(cols_month, twl, params)
        trees[month] = tree
        preds = np.array([tree_predict(tree, train_rows_profiles[i]) for i in rows])
        quantiles[month] = compute_prediction_intervals(twl - preds)

    if created_at is None:
        epoch = os.environ.get("SOURCE_DATE_EPOCH")
        created_at = time.strftime(
            "%Y-%m-%dT%H:%M:%SZ", time.gmtime(int(epoch) if epoch else time.time())
        )
    metadata = {
        "created_at": created_at,
        "feature_set": list(features_used),
        "format_version": FORMAT_VERSION,
        "seed": int(seed),
        "split": float(split),
        "test_n": int(len(test_idx)),
        "train_n": int(len(train_idx)),
    }
    model = TrajectoryModel(tuple(timepoints), trees, quantiles, metadata)
    report = _internal_validation(model, test_cohort, seed)
    return model, report


@dataclass
class InternalValidationReport:
    """Held-out 20% performance: TWL-scale errors plus the BMI metric report."""

    test_ids: tuple[str, ...]
    twl_mad: dict[int, float]
    twl_rmse: dict[int, float]
    n_by_month: dict[int, int]
    bmi_report: MetricReport

    def pooled_twl_rmse(self) -> float:
        total, count = 0.0, 0
        for m, n in self.n_by_month.items():
            total += self.twl_rmse[m] ** 2 * n
            count += n
        return float(np.sqrt(total / count)) if count else float("nan")

    def render(self) -> str:
        lines = ["internal validation (held-out 20%)"]
        for m in sorted(self.twl_mad):
            lines.append(
                f"  month {m}: n={self.n_by_month[m]} "
                f"TWL MAD={self.twl_mad[m]:.2f} TWL RMSE={self.twl_rmse[m]:.2f}"
            )
        lines.append(f"  pooled TWL RMSE: {self.pooled_twl_rmse():.2f}")
        return "\n".join(lines)


def _internal_validation(model: TrajectoryModel, test_cohort: Cohort, seed: int) -> InternalValidationReport:
    rows = test_cohort.profile_rows()
    twl_mad: dict[int, float] = {}
    twl_rmse: dict[int, float] = {}
    n_by_month: dict[int, int] = {}
    for month in model.timepoints:
        idx, twl = test_cohort.twl_at(month)
        if len(idx) == 0:
            continue
        preds = np.array([tree_predict(model.trees[month], rows[i]) for i in idx])
        twl_mad[month] = mad_metric(preds, twl)
        twl_rmse[month] = rmse_metric(preds, twl)
        n_by_month[month] = len(idx)
    bmi_report = evaluate_cohort(model, test_cohort, seed=seed, B=1000, label="internal test subset")
    return InternalValidationReport(test_cohort.ids(), twl_mad, twl_rmse, n_by_month, bmi_report)


def predict_profile(model: TrajectoryModel, profile: PatientProfile) -> TrajectoryPrediction:
    """Predict the anchored, banded, smoothed TWL trajectory for one profile."""
    profile.require_valid()
    row = profile_row(profile)
    months = [0.0]
    twl, lo, hi = [0.0], [0.0], [0.0]
    for month in model.timepoints:
        q25, q75 = model.residual_quantiles[month]
        estimate = tree_predict(model.trees[month], row)
        months.append(float(month))
        twl.append(estimate)
        lo.append(estimate + q25)
        hi.append(estimate + q75)
    grid, curve = smooth_trajectory(months, twl)
    _, curve_lo = smooth_trajectory(months, lo)
    _, curve_hi = smooth_trajectory(months, hi)
    points = tuple(TrajectoryPoint(m, t, a, b) for m, t, a, b in zip(months, twl, lo, hi))
    return TrajectoryPrediction(profile, points, grid, curve, curve_lo, curve_hi)


# --- artifact serialization ------------------------------------------------


class ArtifactError(ValueError):
    """Base class for model artifact load failures."""


class ArtifactVersionError(ArtifactError):
    pass


class ArtifactIntegrityError(ArtifactError):
    pass


class ArtifactFormatError(ArtifactError):
    pass


def _rule_to_dict(rule: SplitRule) -> dict:
    return {
        "feature": rule.feature,
        "kind": rule.kind,
        "threshold": rule.threshold,
        "left_categories": sorted(rule.left_categories) if rule.left_categories is not None else None,
        "improvement": rule.improvement,
        "agreement": rule.agreement,
        "majority_direction": rule.majority_direction,
        "surrogates": [_rule_to_dict(s) for s in rule.surrogates],
    }


def _rule_from_dict(d: dict) -> SplitRule:
    return SplitRule(
        feature=d["feature"],
        kind=d["kind"],
        threshold=d["threshold"],
        left_categories=None if d["left_categories"] is None else frozenset(d["left_categories"]),
        improvement=d["improvement"],
        agreement=d.get("agreement"),
        majority_direction=d["majority_direction"],
        surrogates=tuple(_rule_from_dict(s) for s in d["surrogates"]),
    )


def _node_to_dict(node: TreeNode) -> dict:
    out = {"n": node.n, "mean": node.mean, "sse": node.sse}
    if not node.is_leaf:
        out["split"] = _rule_to_dict(node.split)
        out["left"] = _node_to_dict(node.left)
        out["right"] = _node_to_dict(node.right)
    return out


def _node_from_dict(d: dict) -> TreeNode:
    if "split" not in d:
        return TreeNode(d["n"], d["mean"], d["sse"])
    return TreeNode(
        d["n"], d["mean"], d["sse"],
        _rule_from_dict(d["split"]),
        _node_from_dict(d["left"]),
        _node_from_dict(d["right"]),
    )


def _tree_to_dict(tree: RegressionTree) -> dict:
    return {
        "root": _node_to_dict(tree.root),
        "features_used": sorted(tree.features_used),
        "params": tree.params.__dict__,
        "cp_table": [[e.alpha, e.n_leaves, e.train_sse] for e in tree.cp_table],
    }


def _tree_from_dict(d: dict) -> RegressionTree:
    return RegressionTree(
        _node_from_dict(d["root"]),
        frozenset(d["features_used"]),
        TreeParams(**d["params"]),
        tuple(CpEntry(a, int(k), s) for a, k, s in d["cp_table"]),
    )


def _model_payload(model: TrajectoryModel) -> dict:
    return {
        "metadata": model.metadata,
        "residual_quantiles": {str(m): list(model.residual_quantiles[m]) for m in model.timepoints},
        "timepoints": list(model.timepoints),
        "trees": {str(m): _tree_to_dict(model.trees[m]) for m in model.timepoints},
    }


def _canonical(payload: dict) -> str:
    return json.dumps(payload, sort_keys=True, separators=(",", ":"))


def _payload_checksum(payload: dict) -> str:
    return hashlib.sha256(_canonical(payload).encode("utf-8")).hexdigest()


def save_model(model: TrajectoryModel, destination) -> None:
    """Write the artifact: versioned, checksummed, stably ordered JSON."""
    payload = _model_payload(model)
    doc = {
        "format_version": FORMAT_VERSION,
        "checksum": f"sha256:{_payload_checksum(payload)}",
        "model": payload,
    }
    text = json.dumps(doc, sort_keys=True, indent=1)
    if isinstance(destination, (str, bytes)) or hasattr(destination, "__fspath__"):
        with open(destination, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        destination.write(text)


def _validate_model(model: TrajectoryModel):
    for m in model.timepoints:
        q25, q75 = model.residual_quantiles[m]
        if q25 > q75:
            raise ArtifactFormatError(f"residual quantiles out of order at month {m}")
        extra = model.trees[m].features_used - set(PROFILE_FEATURES)
        if extra:
            raise ArtifactFormatError(f"tree at month {m} uses non-profile features: {sorted(extra)}")

        def check(node: TreeNode):
            if node.is_leaf:
                return
            if node.n != node.left.n + node.right.n:
                raise ArtifactFormatError("node count does not equal the sum of its children")
            check(node.left)
            check(node.right)

        check(model.trees[m].root)


def load_model(source) -> TrajectoryModel:
    """Load and verify an artifact: version, checksum, and type invariants."""
    if isinstance(source, (str, bytes)) or hasattr(source, "__fspath__"):
        with open(source, "r", encoding="utf-8") as fh:
            text = fh.read()
    else:
        text = source.read()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ArtifactFormatError(f"artifact is not well-formed JSON: {exc}") from None
    if not isinstance(doc, dict) or "format_version" not in doc:
        raise ArtifactFormatError("artifact is missing the format_version field")
    if doc["format_version"] != FORMAT_VERSION:
        raise ArtifactVersionError(
            f"unsupported artifact format_version {doc['format_version']} (expected {FORMAT_VERSION})"
        )
    payload = doc.get("model")
    declared = doc.get("checksum", "")
    if not isinstance(payload, dict) or not declared.startswith("sha256:"):
        raise ArtifactFormatError("artifact is missing its model payload or checksum")
    actual = _payload_checksum(payload)
    if declared != f"sha256:{actual}":
        raise ArtifactIntegrityError("artifact checksum mismatch: payload corrupted")

    try:
        timepoints = tuple(int(m) for m in payload["timepoints"])
        trees = {int(m): _tree_from_dict(d) for m, d in payload["trees"].items()}
        quantiles = {int(m): tuple(v) for m, v in payload["residual_quantiles"].items()}
        model = TrajectoryModel(timepoints, trees, quantiles, payload["metadata"])
    except (KeyError, TypeError) as exc:
        raise ArtifactFormatError(f"artifact payload malformed: {exc}") from None
    _validate_model(model)
    return model
