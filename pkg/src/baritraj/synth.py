"""Synthetic cohorts with published-style marginals and a planted, tree-structured
weight-loss surface.

The generator draws baselines from truncated normals whose location is solved
so the truncated mean hits the published target, assigns operations and
comorbidity categories from the stated mix, and produces visit weights from a
deterministic piecewise TWL oracle plus homoscedastic Gaussian noise on the
TWL scale.  The oracle is tree-structured on purpose (operation-dominant at
every month, threshold effects for age/weight/height, step penalties for
diabetes duration, a smoking bonus confined to the first year) so recursive
partitioning is well-specified on the generated data and the full selection
pipeline has a known ground truth to recover.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import optimize
from scipy import stats as sps

from . import features as ft
from .cohort import Cohort, PatientRecord, SCHEDULED_MONTHS, VisitRecord


def solve_truncnorm_loc(target_mean: float, sd: float, lo: float, hi: float) -> float:
    """Location parameter whose [lo, hi]-truncated normal has the target mean."""
    if sd <= 0:
        raise ValueError("sd must be positive")

    def trunc_mean(loc):
        a, b = (lo - loc) / sd, (hi - loc) / sd
        return sps.truncnorm.mean(a, b, loc=loc, scale=sd) - target_mean

    span = 10 * sd
    return float(optimize.brentq(trunc_mean, target_mean - span, target_mean + span, xtol=1e-10))


def _draw_truncnorm(rng, target_mean, sd, lo, hi, size):
    loc = solve_truncnorm_loc(target_mean, sd, lo, hi)
    a, b = (lo - loc) / sd, (hi - loc) / sd
    u = rng.random(size)
    return sps.truncnorm.ppf(u, a, b, loc=loc, scale=sd)


@dataclass(frozen=True)
class Marginals:
    """Baseline distribution targets (defaults follow the primary training cohort)."""

    age_mean: float = 42.1
    age_sd: float = 11.8
    age_range: tuple[float, float] = (18.0, 74.0)
    bmi_mean: float = 47.0
    bmi_sd: float = 7.4
    bmi_range: tuple[float, float] = (26.7, 94.1)
    weight_range: tuple[float, float] = (65.0, 295.0)
    female_fraction: float = 0.739
    height_female: tuple[float, float] = (1.63, 0.065)
    height_male: tuple[float, float] = (1.77, 0.07)
    height_range: tuple[float, float] = (1.40, 2.10)
    operation_mix: dict = field(
        default_factory=lambda: {"RYGB": 0.614, "SG": 0.192, "AGB": 0.194}
    )
    none_fraction: float = 0.258
    pre_t2d_fraction: float = 0.396
    t2d_fraction: float = 0.346
    smoker_fraction: float = 0.105
    t2d_duration_mean: float = 21.0
    t2d_duration_sd: float = 23.1
    t2d_duration_range: tuple[float, float] = (0.5, 45.0)


@dataclass(frozen=True)
class EffectParams:
    """Planted TWL surface: per-operation base levels plus additive modifiers."""

    base: dict = field(
        default_factory=lambda: {
            "RYGB": {1: 12.0, 3: 20.5, 12: 34.0, 24: 35.5, 60: 29.9},
            "SG": {1: 12.0, 3: 20.0, 12: 32.0, 24: 32.0, 60: 25.3},
            "AGB": {1: 6.0, 3: 9.5, 12: 18.0, 24: 19.5, 60: 16.6},
        }
    )
    pre_t2d_penalty: float = -0.5
    t2d_penalty: float = -1.5
    duration_steps: tuple[tuple[float, float], ...] = ((5.0, -1.0), (10.0, -1.0))
    age_threshold: float = 51.0
    age_penalty: float = -2.5
    smoking_bonus: float = 1.5
    smoking_months: tuple[int, ...] = (1, 3, 12)
    weight_threshold: float = 140.0
    weight_bonus: float = 1.5
    height_threshold: float = 1.60
    height_penalty: float = -1.5


@dataclass(frozen=True)
class NoiseFeatureSpec:
    name: str
    kind: str  # numeric | categorical
    levels: tuple[str, ...] = ()
    mean: float = 0.0
    sd: float = 1.0
    missing_rate: float = 0.0


DEFAULT_NOISE_FEATURES = (
    NoiseFeatureSpec("x_crp_mg_l", "numeric", mean=5.0, sd=4.0, missing_rate=0.15),
    NoiseFeatureSpec("x_vitamin_d_nmol_l", "numeric", mean=50.0, sd=20.0),
    NoiseFeatureSpec("x_employment", "categorical", levels=("employed", "unemployed", "retired", "student")),
)


@dataclass(frozen=True)
class _OracleProfile:
    """Lightweight profile view for oracle evaluation during generation."""

    age_years: float
    weight_kg: float
    height_m: float
    smoker: bool
    diabetes_status: str
    diabetes_duration_years: float
    operation: str


@dataclass(frozen=True)
class GeneratorSpec:
    n: int
    seed: int = 0
    marginals: Marginals = field(default_factory=Marginals)
    effects: EffectParams = field(default_factory=EffectParams)
    noise_sd: float = 4.0
    missingness: dict = field(default_factory=lambda: {"smoker": 0.08})
    censoring: dict = field(
        default_factory=lambda: {1: 0.01, 3: 0.02, 12: 0.04, 24: 0.10, 60: 0.20}
    )
    noise_features: tuple[NoiseFeatureSpec, ...] = DEFAULT_NOISE_FEATURES

    def validate(self):
        if self.n < 1:
            raise ValueError("n must be positive")
        if self.noise_sd < 0:
            raise ValueError("noise_sd must be non-negative")
        mix = self.marginals.operation_mix
        if abs(sum(mix.values()) - 1.0) > 1e-9:
            raise ValueError("operation mix must sum to 1")
        fracs = [
            self.marginals.female_fraction,
            self.marginals.none_fraction,
            self.marginals.pre_t2d_fraction,
            self.marginals.t2d_fraction,
            self.marginals.smoker_fraction,
            *self.missingness.values(),
            *self.censoring.values(),
        ]
        if any(not (0.0 <= f <= 1.0) for f in fracs):
            raise ValueError("all fractions must lie in [0, 1]")
        for sd in (self.marginals.age_sd, self.marginals.bmi_sd, self.marginals.t2d_duration_sd):
            if sd <= 0:
                raise ValueError("marginal standard deviations must be positive")


def oracle_twl(profile, month: int, effects: EffectParams | None = None) -> float:
    """Ground-truth TWL percent for one profile at a scheduled month.

    Piecewise-constant surface: operation sets the level, modifiers add steps.
    The smoking bonus vanishes after the first year; diabetes penalties and
    the age/weight/height steps apply at every timepoint.
    """
    e = effects or EffectParams()
    if month not in SCHEDULED_MONTHS:
        raise ValueError(f"month {month} is not a scheduled timepoint")
    twl = e.base[profile.operation][month]
    if profile.diabetes_status == "pre_t2d":
        twl += e.pre_t2d_penalty
    elif profile.diabetes_status == "t2d":
        twl += e.t2d_penalty
        for threshold, step in e.duration_steps:
            if profile.diabetes_duration_years >= threshold:
                twl += step
    if profile.age_years > e.age_threshold:
        twl += e.age_penalty
    if profile.smoker and month in e.smoking_months:
        twl += e.smoking_bonus
    if profile.weight_kg > e.weight_threshold:
        twl += e.weight_bonus
    if profile.height_m < e.height_threshold:
        twl += e.height_penalty
    return float(twl)


def generate_cohort(spec: GeneratorSpec) -> Cohort:
    """Draw a cohort: baselines per marginals, outcomes per oracle plus noise,
    then per-timepoint censoring and per-field missingness.  Deterministic."""
    spec.validate()
    m = spec.marginals
    rng = np.random.default_rng(spec.seed)
    n = spec.n

    age = _draw_truncnorm(rng, m.age_mean, m.age_sd, *m.age_range, size=n)
    female = rng.random(n) < m.female_fraction
    hf = _draw_truncnorm(rng, m.height_female[0], m.height_female[1], *m.height_range, size=n)
    hm = _draw_truncnorm(rng, m.height_male[0], m.height_male[1], *m.height_range, size=n)
    height = np.where(female, hf, hm)
    bmi = _draw_truncnorm(rng, m.bmi_mean, m.bmi_sd, *m.bmi_range, size=n)
    weight = bmi * height**2
    # redraw the few (BMI, height) pairs whose implied weight leaves the envelope
    for _ in range(100):
        bad = (weight < m.weight_range[0]) | (weight > m.weight_range[1])
        if not bad.any():
            break
        k = int(bad.sum())
        bmi[bad] = _draw_truncnorm(rng, m.bmi_mean, m.bmi_sd, *m.bmi_range, size=k)
        height[bad] = np.where(
            female[bad],
            _draw_truncnorm(rng, m.height_female[0], m.height_female[1], *m.height_range, size=k),
            _draw_truncnorm(rng, m.height_male[0], m.height_male[1], *m.height_range, size=k),
        )
        weight = bmi * height**2

    ops = list(m.operation_mix)
    operation = rng.choice(ops, size=n, p=[m.operation_mix[o] for o in ops])
    diab_levels = ("none", "pre_t2d", "t2d")
    diab_p = np.array([m.none_fraction, m.pre_t2d_fraction, m.t2d_fraction])
    diabetes = rng.choice(diab_levels, size=n, p=diab_p / diab_p.sum())
    duration = np.zeros(n)
    t2d_mask = diabetes == "t2d"
    duration[t2d_mask] = _draw_truncnorm(
        rng, m.t2d_duration_mean, m.t2d_duration_sd, *m.t2d_duration_range, size=int(t2d_mask.sum())
    )
    smoker = rng.random(n) < m.smoker_fraction

    # follow-up: censoring at the first failed visit keeps the prefix property
    keep = np.ones(n, dtype=bool)
    visit_kept = {}
    for month in SCHEDULED_MONTHS:
        keep = keep & (rng.random(n) >= spec.censoring.get(month, 0.0))
        visit_kept[month] = keep.copy()

    noise = rng.normal(0.0, spec.noise_sd, size=(n, len(SCHEDULED_MONTHS))) if spec.noise_sd > 0 else np.zeros((n, len(SCHEDULED_MONTHS)))
    smoker_missing = rng.random(n) < spec.missingness.get("smoker", 0.0)

    extra_cols: dict[str, ft.FeatureColumn] = {}
    for nf in spec.noise_features:
        if nf.kind == "numeric":
            vals = rng.normal(nf.mean, nf.sd, size=n)
            miss = rng.random(n) < max(nf.missing_rate, spec.missingness.get(nf.name, 0.0))
            vals[miss] = np.nan
            extra_cols[nf.name] = ft.numeric_column(nf.name, vals)
        else:
            raw = rng.choice(list(nf.levels), size=n)
            miss = rng.random(n) < max(nf.missing_rate, spec.missingness.get(nf.name, 0.0))
            cells = [None if miss[i] else str(raw[i]) for i in range(n)]
            extra_cols[nf.name] = ft.categorical_column(nf.name, cells)

    records = []
    for i in range(n):
        # the oracle sees the true smoking status even when the record masks it
        truth = _OracleProfile(
            float(age[i]), float(weight[i]), float(height[i]), bool(smoker[i]),
            str(diabetes[i]), float(duration[i]), str(operation[i]),
        )
        visits = []
        for j, month in enumerate(SCHEDULED_MONTHS):
            if not visit_kept[month][i]:
                break
            twl = oracle_twl(truth, month, spec.effects) + noise[i, j]
            visits.append(VisitRecord(month, float(weight[i] * (1.0 - twl / 100.0))))
        censored = None if len(visits) == len(SCHEDULED_MONTHS) else (visits[-1].month if visits else 0)
        records.append(
            PatientRecord(
                id=f"synth-{i:06d}",
                age_years=truth.age_years,
                weight_kg=truth.weight_kg,
                height_m=truth.height_m,
                sex="female" if female[i] else "male",
                smoker=None if smoker_missing[i] else truth.smoker,
                diabetes_status=truth.diabetes_status,
                diabetes_duration_years=truth.diabetes_duration_years,
                operation=truth.operation,
                prior_bariatric_surgery=False,
                visits=tuple(visits),
                censored_after_months=censored,
            )
        )
    return Cohort(tuple(records), extra_cols)


def spec_from_dict(d: dict) -> GeneratorSpec:
    """Build a GeneratorSpec from a plain JSON-style dict (CLI config files)."""
    kwargs = dict(d)
    if "marginals" in kwargs:
        marg = dict(kwargs["marginals"])
        for key in ("age_range", "bmi_range", "weight_range", "height_range",
                    "height_female", "height_male", "t2d_duration_range"):
            if key in marg:
                marg[key] = tuple(marg[key])
        kwargs["marginals"] = Marginals(**marg)
    if "effects" in kwargs:
        eff = dict(kwargs["effects"])
        if "base" in eff:
            eff["base"] = {op: {int(k): float(v) for k, v in t.items()} for op, t in eff["base"].items()}
        if "duration_steps" in eff:
            eff["duration_steps"] = tuple(tuple(x) for x in eff["duration_steps"])
        if "smoking_months" in eff:
            eff["smoking_months"] = tuple(int(x) for x in eff["smoking_months"])
        kwargs["effects"] = EffectParams(**eff)
    if "censoring" in kwargs:
        kwargs["censoring"] = {int(k): float(v) for k, v in kwargs["censoring"].items()}
    if "noise_features" in kwargs:
        kwargs["noise_features"] = tuple(
            NoiseFeatureSpec(**{**nf, "levels": tuple(nf.get("levels", ()))}) for nf in kwargs["noise_features"]
        )
    return GeneratorSpec(**kwargs)
