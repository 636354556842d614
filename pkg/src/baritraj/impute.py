"""Feature screening and multiple imputation by predictive mean matching.

Screening drops columns that are mostly missing, constant, or free text before
the selection stage sees them.  PMM imputes each remaining incomplete column m
times: a linear predictor fitted on six always-complete key variables (weight,
sex, age, operation, type 2 diabetes presence and duration) scores every row,
and each missing cell copies the observed value of one of the ``donor_k``
complete cases with the nearest predicted mean, drawn uniformly.  Imputed
values are therefore always values observed somewhere in the same column.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import features as ft
from .cohort import Cohort, replace_smoker

#: Categorical columns with more distinct observed values than this (or than
#: half the observed cells) carry no reusable levels and are treated as free text.
FREE_TEXT_LEVELS = 20


@dataclass(frozen=True)
class ScreenResult:
    retained: tuple[str, ...]
    dropped: tuple[tuple[str, str], ...]  # (name, reason)

    def dropped_names(self) -> tuple[str, ...]:
        return tuple(name for name, _ in self.dropped)


def screen_features(cohort: Cohort, max_missing_fraction: float = 0.5) -> ScreenResult:
    """Partition baseline features into retained and dropped-with-reason lists.

    Drops columns whose missingness strictly exceeds ``max_missing_fraction``,
    single-level columns, and free-text categoricals.
    """
    if len(cohort) == 0:
        raise ValueError("cannot screen an empty cohort")
    retained, dropped = [], []
    for name, col in cohort.feature_table().items():
        if col.missing_fraction > max_missing_fraction:
            dropped.append((name, "missing"))
            continue
        levels = col.levels()
        if len(levels) <= 1:
            dropped.append((name, "single_level"))
            continue
        if col.kind == ft.CATEGORICAL:
            n_obs = int(col.observed_mask.sum())
            if len(levels) > max(FREE_TEXT_LEVELS, 0.5 * n_obs):
                dropped.append((name, "free_text"))
                continue
        retained.append(name)
    return ScreenResult(tuple(retained), tuple(dropped))


@dataclass(frozen=True)
class ImputationSet:
    """m completed cohorts produced by seeded predictive mean matching."""

    m: int
    datasets: tuple[Cohort, ...]
    donor_k: int
    seed: int


def _key_design(cohort: Cohort) -> np.ndarray:
    """Design matrix of the six key conditioning variables (always complete)."""
    recs = cohort.records
    n = len(recs)
    cols = [np.ones(n)]
    cols.append(np.array([r.weight_kg for r in recs]))
    cols.append(np.array([1.0 if r.sex == "male" else 0.0 for r in recs]))
    cols.append(np.array([r.age_years for r in recs]))
    for op in ("SG", "AGB"):  # RYGB is the reference level
        cols.append(np.array([1.0 if r.operation == op else 0.0 for r in recs]))
    cols.append(np.array([1.0 if r.diabetes_status == "t2d" else 0.0 for r in recs]))
    cols.append(np.array([r.diabetes_duration_years for r in recs]))
    return np.column_stack(cols)


def _predicted_means(Z: np.ndarray, col: ft.FeatureColumn) -> np.ndarray:
    """Predicted means for every row; vector-valued for categorical targets."""
    obs = col.observed_mask
    if col.kind == ft.CATEGORICAL:
        levels = col.levels()
        targets = np.column_stack(
            [np.array([1.0 if v == lev else 0.0 for v in col.values[obs]]) for lev in levels]
        )
    else:
        targets = col.values[obs].astype(float)[:, None]
    coef, *_ = np.linalg.lstsq(Z[obs], targets, rcond=None)
    return Z @ coef


def _check_conditioning_complete(cohort: Cohort):
    for r in cohort.records:
        if any(
            v is None or (isinstance(v, float) and np.isnan(v))
            for v in (r.weight_kg, r.age_years, r.diabetes_duration_years)
        ):
            raise ValueError(f"key conditioning variables incomplete for patient {r.id}")


def pmm_impute(cohort: Cohort, m: int = 10, donor_k: int = 5, seed: int = 0) -> ImputationSet:
    """Complete every incomplete baseline column m times by donor matching.

    The linear predictor per column is fitted once on complete cases; only the
    uniform donor draws differ between the m datasets.  Deterministic under
    ``seed``; a column with fewer than ``donor_k`` complete cases is an error.
    """
    if m < 1:
        raise ValueError("m must be at least 1")
    _check_conditioning_complete(cohort)
    table = cohort.feature_table()
    incomplete = {name: col for name, col in table.items() if col.missing_mask.any()}

    Z = _key_design(cohort)
    plans = {}
    for name, col in incomplete.items():
        obs_idx = np.flatnonzero(col.observed_mask)
        if len(obs_idx) < donor_k:
            raise ValueError(f"column {name!r} has fewer than donor_k={donor_k} complete cases")
        preds = _predicted_means(Z, col)
        mis_idx = np.flatnonzero(col.missing_mask)
        donor_pool = []
        for i in mis_idx:
            dist = np.linalg.norm(preds[obs_idx] - preds[i], axis=1)
            order = np.lexsort((obs_idx, dist))  # distance, then row index for determinism
            donor_pool.append(obs_idx[order[:donor_k]])
        plans[name] = (mis_idx, donor_pool, col)

    datasets = []
    for child in np.random.SeedSequence(seed).spawn(m):
        rng = np.random.default_rng(child)
        filled: dict[str, np.ndarray] = {}
        for name in plans:
            mis_idx, donor_pool, col = plans[name]
            values = np.array(col.values, dtype=col.values.dtype)
            for i, donors in zip(mis_idx, donor_pool):
                values[i] = col.values[donors[rng.integers(donor_k)]]
            filled[name] = values
        datasets.append(_apply_fill(cohort, filled))
    return ImputationSet(m, tuple(datasets), donor_k, seed)


def _apply_fill(cohort: Cohort, filled: dict[str, np.ndarray]) -> Cohort:
    records = cohort.records
    if "smoker" in filled:
        vals = filled["smoker"]
        records = tuple(
            replace_smoker(r, bool(vals[i])) if r.smoker is None else r
            for i, r in enumerate(records)
        )
    extras = {}
    for name, col in cohort.extra_features.items():
        extras[name] = col.with_values(filled[name]) if name in filled else col
    return Cohort(records, extras)
