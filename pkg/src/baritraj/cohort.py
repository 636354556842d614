"""Longitudinal cohort data model, eligibility and censoring rules, CSV ingestion.

The scheduled follow-up grid is months 1, 3, 12, 24, and 60.  A patient's
usable visits are the longest prefix of that grid: the series is censored at
the first missing scheduled visit, and visits recorded after a gap are
discarded.  Records and cohorts are immutable after load and safe to share
across threads.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field, replace

import numpy as np

from . import features as ft
from .outcomes import compute_bmi, compute_ewl, compute_twl

SCHEDULED_MONTHS = (1, 3, 12, 24, 60)
OPERATIONS = ("RYGB", "SG", "AGB")
DIABETES_LEVELS = ("none", "pre_t2d", "t2d")
SEXES = ("female", "male")

#: The seven baseline variables a trained model may consume.
PROFILE_FEATURES = (
    "age_years",
    "weight_kg",
    "height_m",
    "smoker",
    "diabetes_status",
    "diabetes_duration_years",
    "operation",
)

MIN_AGE_YEARS = 18.0
WEIGHT_RANGE_KG = (40.0, 400.0)
HEIGHT_RANGE_M = (1.0, 2.5)


class SchemaError(ValueError):
    """The input table does not match the expected CSV schema."""


@dataclass(frozen=True)
class VisitRecord:
    month: int
    weight_kg: float

    def __post_init__(self):
        if self.month not in SCHEDULED_MONTHS:
            raise ValueError(f"visit month {self.month} not in {SCHEDULED_MONTHS}")
        if self.weight_kg <= 0:
            raise ValueError("visit weight must be positive")


@dataclass(frozen=True)
class PatientRecord:
    """One subject's baseline profile, follow-up visits, and censoring state."""

    id: str
    age_years: float
    weight_kg: float
    height_m: float
    sex: str
    smoker: bool | None
    diabetes_status: str
    diabetes_duration_years: float
    operation: str
    prior_bariatric_surgery: bool
    visits: tuple[VisitRecord, ...] = ()
    censored_after_months: int | None = None

    def validate(self) -> list[str]:
        """Return invariant-violation messages (empty when the record is valid)."""
        problems = []
        if self.age_years < MIN_AGE_YEARS:
            problems.append(f"age_years: must be >= {MIN_AGE_YEARS:g}, got {self.age_years:g}")
        lo, hi = WEIGHT_RANGE_KG
        if not (lo <= self.weight_kg <= hi):
            problems.append(f"weight_kg: must be in [{lo:g}, {hi:g}], got {self.weight_kg:g}")
        lo, hi = HEIGHT_RANGE_M
        if not (lo < self.height_m < hi):
            problems.append(f"height_m: must be in ({lo:g}, {hi:g}), got {self.height_m:g}")
        if self.sex not in SEXES:
            problems.append(f"sex: must be one of {SEXES}, got {self.sex!r}")
        if self.diabetes_status not in DIABETES_LEVELS:
            problems.append(f"diabetes_status: must be one of {DIABETES_LEVELS}, got {self.diabetes_status!r}")
        if self.diabetes_duration_years < 0:
            problems.append("diabetes_duration_years: must be >= 0")
        if self.diabetes_status != "t2d" and self.diabetes_duration_years != 0:
            problems.append("diabetes_duration_years: must be 0 unless diabetes_status is t2d")
        if self.operation not in OPERATIONS:
            problems.append(f"operation: must be one of {OPERATIONS}, got {self.operation!r}")
        months = [v.month for v in self.visits]
        if months != sorted(set(months)) or any(m not in SCHEDULED_MONTHS for m in months):
            problems.append(f"visits: months must be strictly increasing within {SCHEDULED_MONTHS}")
        return problems

    @property
    def baseline_bmi(self) -> float:
        return compute_bmi(self.weight_kg, self.height_m)

    def visit_at(self, month: int) -> VisitRecord | None:
        for v in self.visits:
            if v.month == month:
                return v
        return None

    def observed_months(self) -> tuple[int, ...]:
        return tuple(v.month for v in self.visits)


@dataclass(frozen=True)
class Cohort:
    """An immutable collection of patient records plus extra baseline columns."""

    records: tuple[PatientRecord, ...]
    extra_features: dict[str, ft.FeatureColumn] = field(default_factory=dict)

    def __post_init__(self):
        ids = [r.id for r in self.records]
        if len(set(ids)) != len(ids):
            raise ValueError("cohort patient ids must be unique")
        for name, col in self.extra_features.items():
            if len(col) != len(self.records):
                raise ValueError(f"extra feature {name!r} is not aligned to the records")

    def __len__(self) -> int:
        return len(self.records)

    def ids(self) -> tuple[str, ...]:
        return tuple(r.id for r in self.records)

    def subset(self, indices) -> "Cohort":
        idx = np.asarray(indices, dtype=int)
        recs = tuple(self.records[i] for i in idx)
        extras = {name: col.with_values(col.values[idx]) for name, col in self.extra_features.items()}
        return Cohort(recs, extras)

    def feature_table(self) -> dict[str, ft.FeatureColumn]:
        """All baseline features (the fixed fields first, then extras)."""
        recs = self.records
        table = {
            "age_years": ft.numeric_column("age_years", [r.age_years for r in recs]),
            "weight_kg": ft.numeric_column("weight_kg", [r.weight_kg for r in recs]),
            "height_m": ft.numeric_column("height_m", [r.height_m for r in recs]),
            "sex": ft.categorical_column("sex", [r.sex for r in recs]),
            "smoker": ft.boolean_column("smoker", [r.smoker for r in recs]),
            "diabetes_status": ft.categorical_column("diabetes_status", [r.diabetes_status for r in recs]),
            "diabetes_duration_years": ft.numeric_column(
                "diabetes_duration_years", [r.diabetes_duration_years for r in recs]
            ),
            "operation": ft.categorical_column("operation", [r.operation for r in recs]),
            "prior_bariatric_surgery": ft.boolean_column(
                "prior_bariatric_surgery", [r.prior_bariatric_surgery for r in recs]
            ),
        }
        table.update(self.extra_features)
        return table

    def twl_at(self, month: int) -> tuple[np.ndarray, np.ndarray]:
        """(row indices, observed TWL percent) for patients with a visit at ``month``."""
        idx, twl = [], []
        for i, r in enumerate(self.records):
            v = r.visit_at(month)
            if v is not None:
                idx.append(i)
                twl.append(compute_twl(r.weight_kg, v.weight_kg))
        return np.asarray(idx, dtype=int), np.asarray(twl, dtype=float)

    def profile_rows(self) -> list[dict]:
        return [profile_row(r) for r in self.records]


def profile_row(record) -> dict:
    """Map a record (or profile) to the feature dict trees and models consume."""
    smoker = record.smoker
    return {
        "age_years": float(record.age_years),
        "weight_kg": float(record.weight_kg),
        "height_m": float(record.height_m),
        "smoker": None if smoker is None else float(bool(smoker)),
        "diabetes_status": record.diabetes_status,
        "diabetes_duration_years": float(record.diabetes_duration_years),
        "operation": record.operation,
    }


def scheduled_month_for(actual_month: float, tolerance: float = 0.25, min_window: float = 0.5) -> int | None:
    """Map an actual visit time to its scheduled month, or None when too delayed.

    A visit matches scheduled month m when it falls within +/- max(tolerance*m,
    min_window) of m.  Visits outside every window count as missing, which is
    how overlong delays between scheduled and actual visits are excluded.
    """
    best = None
    for m in SCHEDULED_MONTHS:
        half = max(tolerance * m, min_window)
        if abs(actual_month - m) <= half:
            dist = abs(actual_month - m)
            if best is None or dist < best[0]:
                best = (dist, m)
    return None if best is None else best[1]


@dataclass
class ExclusionReport:
    """Per-rule tallies of why source rows did not become cohort records."""

    rows_read: int = 0
    retained: int = 0
    excluded: dict[str, int] = field(default_factory=dict)
    row_errors: list[tuple[int, str]] = field(default_factory=list)

    def tally(self, rule: str):
        self.excluded[rule] = self.excluded.get(rule, 0) + 1

    @property
    def total_excluded(self) -> int:
        return sum(self.excluded.values())

    def render(self) -> str:
        lines = [
            "exclusion report",
            f"  rows read:        {self.rows_read}",
            f"  records retained: {self.retained}",
        ]
        for rule in sorted(self.excluded):
            lines.append(f"  excluded [{rule}]: {self.excluded[rule]}")
        for line_no, msg in self.row_errors:
            lines.append(f"  row {line_no}: {msg}")
        return "\n".join(lines)


_FIXED_COLUMNS = [
    "id", "age", "weight_kg", "height_m", "sex", "smoker", "diabetes",
    "diabetes_years", "operation", "prior_surgery",
    "weight_m1", "weight_m3", "weight_m12", "weight_m24", "weight_m60",
]
_SEX_CODES = {"F": "female", "M": "male"}
_DIABETES_CODES = {"none": "none", "pre": "pre_t2d", "t2d": "t2d"}


def _parse_float(raw: str, column: str) -> float:
    try:
        return float(raw)
    except ValueError:
        raise ValueError(f"{column}: cannot parse {raw!r} as a number") from None


def _parse_flag(raw: str, column: str) -> bool:
    if raw not in ("0", "1"):
        raise ValueError(f"{column}: expected 0 or 1, got {raw!r}")
    return raw == "1"


def _parse_row(row: dict) -> tuple[PatientRecord, bool]:
    """Parse one CSV row into an (uncensored-fields) record.

    Returns the record plus whether it was eligible; raises ValueError with a
    field-specific message on malformed content.
    """
    rid = (row.get("id") or "").strip()
    if not rid:
        raise ValueError("id: missing")
    age = _parse_float(row["age"], "age")
    weight = _parse_float(row["weight_kg"], "weight_kg")
    height = _parse_float(row["height_m"], "height_m")
    sex_raw = row["sex"].strip()
    if sex_raw not in _SEX_CODES:
        raise ValueError(f"sex: expected F or M, got {sex_raw!r}")
    smoker_raw = row["smoker"].strip()
    if smoker_raw in ("", "NA"):
        smoker = None
    elif smoker_raw in ("0", "1"):
        smoker = smoker_raw == "1"
    else:
        raise ValueError(f"smoker: expected 0, 1 or NA, got {smoker_raw!r}")
    diab_raw = row["diabetes"].strip()
    if diab_raw not in _DIABETES_CODES:
        raise ValueError(f"diabetes: expected none, pre or t2d, got {diab_raw!r}")
    duration = _parse_float(row["diabetes_years"], "diabetes_years")
    operation = row["operation"].strip()
    if operation not in OPERATIONS:
        raise ValueError(f"operation: expected one of {OPERATIONS}, got {operation!r}")
    prior = _parse_flag(row["prior_surgery"].strip(), "prior_surgery")

    visits = []
    for m in SCHEDULED_MONTHS:
        raw = (row.get(f"weight_m{m}") or "").strip()
        if raw == "":
            break  # first missing scheduled visit censors everything after it
        w = _parse_float(raw, f"weight_m{m}")
        if w <= 0:
            raise ValueError(f"weight_m{m}: visit weight must be positive")
        visits.append(VisitRecord(m, w))
    censored = None if len(visits) == len(SCHEDULED_MONTHS) else (visits[-1].month if visits else 0)

    record = PatientRecord(
        id=rid,
        age_years=age,
        weight_kg=weight,
        height_m=height,
        sex=_SEX_CODES[sex_raw],
        smoker=smoker,
        diabetes_status=_DIABETES_CODES[diab_raw],
        diabetes_duration_years=duration,
        operation=operation,
        prior_bariatric_surgery=prior,
        visits=tuple(visits),
        censored_after_months=censored,
    )
    problems = record.validate()
    # Eligibility rules are reported separately from malformed content.
    eligibility = [p for p in problems if p.startswith("age_years")]
    malformed = [p for p in problems if not p.startswith("age_years")]
    if malformed:
        raise ValueError("; ".join(malformed))
    return record, not eligibility and not prior


def load_cohort(source) -> tuple[Cohort, ExclusionReport]:
    """Load a cohort from a CSV path or file object, applying eligibility rules.

    Patients under 18 or with prior bariatric surgery are excluded and tallied;
    malformed rows are collected as per-row errors and the load continues.  A
    header that does not contain the fixed schema columns is a fatal
    SchemaError.  Additional ``x_``-prefixed columns become extra features
    (numeric when every observed cell parses as a number, else categorical).
    """
    if isinstance(source, (str, bytes)) or hasattr(source, "__fspath__"):
        with open(source, "r", encoding="utf-8", newline="") as fh:
            return load_cohort(fh)

    reader = csv.DictReader(source)
    header = reader.fieldnames or []
    missing = [c for c in _FIXED_COLUMNS if c not in header]
    if missing:
        raise SchemaError(f"missing required columns: {', '.join(missing)}")
    extra_names = [c for c in header if c.startswith("x_")]

    report = ExclusionReport()
    records: list[PatientRecord] = []
    extra_raw: dict[str, list] = {name: [] for name in extra_names}
    for line_no, row in enumerate(reader, start=2):
        report.rows_read += 1
        try:
            record, eligible = _parse_row(row)
        except ValueError as exc:
            report.tally("malformed")
            report.row_errors.append((line_no, str(exc)))
            continue
        if record.prior_bariatric_surgery:
            report.tally("prior_bariatric_surgery")
            continue
        if not eligible:
            report.tally("age_under_18")
            continue
        records.append(record)
        for name in extra_names:
            raw = (row.get(name) or "").strip()
            extra_raw[name].append(raw if raw != "" else None)

    extras: dict[str, ft.FeatureColumn] = {}
    for name in extra_names:
        cells = extra_raw[name]
        numeric = True
        for c in cells:
            if c is None:
                continue
            try:
                float(c)
            except ValueError:
                numeric = False
                break
        if numeric:
            vals = np.array([np.nan if c is None else float(c) for c in cells])
            extras[name] = ft.numeric_column(name, vals)
        else:
            extras[name] = ft.categorical_column(name, cells)

    cohort = Cohort(tuple(records), extras)
    report.retained = len(records)
    return cohort, report


def _format_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def cohort_to_csv(cohort: Cohort, destination) -> None:
    """Write a cohort back out in the ingestion schema (lossless round trip)."""
    if isinstance(destination, (str, bytes)) or hasattr(destination, "__fspath__"):
        with open(destination, "w", encoding="utf-8", newline="") as fh:
            cohort_to_csv(cohort, fh)
            return

    extra_names = list(cohort.extra_features)
    writer = csv.writer(destination)
    writer.writerow(_FIXED_COLUMNS + extra_names)
    sex_back = {v: k for k, v in _SEX_CODES.items()}
    diab_back = {v: k for k, v in _DIABETES_CODES.items()}
    for i, r in enumerate(cohort.records):
        row = [
            r.id,
            repr(float(r.age_years)),
            repr(float(r.weight_kg)),
            repr(float(r.height_m)),
            sex_back[r.sex],
            "" if r.smoker is None else ("1" if r.smoker else "0"),
            diab_back[r.diabetes_status],
            repr(float(r.diabetes_duration_years)),
            r.operation,
            "1" if r.prior_bariatric_surgery else "0",
        ]
        for m in SCHEDULED_MONTHS:
            v = r.visit_at(m)
            row.append("" if v is None else repr(float(v.weight_kg)))
        for name in extra_names:
            col = cohort.extra_features[name]
            val = col.values[i]
            if col.kind == ft.CATEGORICAL:
                row.append("" if val is None else str(val))
            else:
                row.append("" if np.isnan(val) else repr(float(val)))
        writer.writerow(row)


def cohort_to_csv_text(cohort: Cohort) -> str:
    buf = io.StringIO()
    cohort_to_csv(cohort, buf)
    return buf.getvalue()


@dataclass(frozen=True)
class OutcomeRow:
    """One visit's outcomes in the four reporting units."""

    id: str
    month: int
    weight_kg: float
    bmi: float
    twl_percent: float
    ewl_percent: float | None  # None when baseline BMI <= 25


def derive_outcomes(cohort: Cohort) -> list[OutcomeRow]:
    """Expand every retained, non-censored visit into the four outcome units."""
    rows = []
    for r in cohort.records:
        b0 = r.baseline_bmi
        for v in r.visits:
            bmi = compute_bmi(v.weight_kg, r.height_m)
            twl = compute_twl(r.weight_kg, v.weight_kg)
            ewl = compute_ewl(b0, bmi) if b0 > 25.0 else None
            rows.append(OutcomeRow(r.id, v.month, v.weight_kg, bmi, twl, ewl))
    return rows


def replace_smoker(record: PatientRecord, smoker: bool | None) -> PatientRecord:
    return replace(record, smoker=smoker)
