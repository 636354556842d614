"""End-to-end training: screen features, impute, select per timepoint by
cross-validated LASSO, pool the selections, and train the per-timepoint trees.

LASSO sees one-hot encoded, standardized baseline features of the imputed
datasets; a feature counts as selected when any of its levels is nonzero at
the chosen lambda, and it enters the final model when selected for at least
one timepoint in at least one imputed dataset.  Trees train on the original
(non-imputed) records, relying on surrogates for residual missingness.

The (timepoint x imputed dataset) selection grid is embarrassingly parallel;
with ``threads > 1`` it runs on a process pool with per-task seeds and a
keyed reduction, so results are identical for any worker count.
"""

from __future__ import annotations

import concurrent.futures
from dataclasses import dataclass, field

import numpy as np

from . import features as ft
from .cohort import Cohort, SCHEDULED_MONTHS
from .impute import ImputationSet, ScreenResult, pmm_impute, screen_features
from .lasso import LassoFit, cv_select_lambda, pool_selected_features, standardize_design
from .trajectory import InternalValidationReport, TrajectoryModel, train_trajectory_model
from .tree import TreeParams


@dataclass(frozen=True)
class PipelineConfig:
    seed: int = 0
    m_imputations: int = 10
    donor_k: int = 5
    cv_folds: int = 10
    cv_rule: str = "1se"
    split: float = 0.8
    timepoints: tuple[int, ...] = SCHEDULED_MONTHS
    tree_params: TreeParams = field(default_factory=TreeParams)
    max_missing_fraction: float = 0.5
    threads: int = 1


@dataclass
class SelectionSummary:
    """Per-timepoint pooled supports plus the global union with frequencies."""

    per_timepoint: dict[int, frozenset[str]]
    frequency: dict[str, float]  # fraction of (timepoint x dataset) fits selecting it
    selected: frozenset[str]


@dataclass
class PipelineResult:
    screen: ScreenResult
    imputation: ImputationSet
    selection: SelectionSummary
    model: TrajectoryModel
    report: InternalValidationReport


def _design_for(columns: dict[str, ft.FeatureColumn], rows: np.ndarray):
    """One-hot + raw numeric design over complete (imputed) columns.

    Returns (matrix, column names, parent feature per column).  Columns that
    are constant over the requested rows are skipped (they cannot be
    standardized and carry no signal for those rows).
    """
    mats, names, parents = [], [], []
    for name, col in columns.items():
        if col.kind == ft.CATEGORICAL:
            for level_name, indicator in ft.one_hot(col).items():
                v = indicator[rows]
                if np.nanstd(v) == 0:
                    continue
                mats.append(v)
                names.append(level_name)
                parents.append(name)
        else:
            v = col.values[rows].astype(float)
            if np.nanstd(v) == 0:
                continue
            mats.append(v)
            names.append(name)
            parents.append(name)
    X = np.column_stack(mats)
    if np.isnan(X).any():
        bad = sorted({names[j] for j in np.unique(np.nonzero(np.isnan(X))[1])})
        raise ValueError(f"design still has missing cells after imputation: {bad}")
    return X, tuple(names), tuple(parents)


def _cv_task(task):
    """One grid cell: fit the path with CV on an already-built design."""
    month, d, Xs, ys, names, std, folds, seed, rule = task
    fit = cv_select_lambda(
        Xs, ys, folds=folds, seed=seed, feature_names=names, standardization=std, rule=rule
    )
    return month, d, fit


def select_features(
    cohort: Cohort,
    imputation: ImputationSet,
    screen: ScreenResult,
    config: PipelineConfig,
) -> tuple[SelectionSummary, dict[tuple[int, int], LassoFit]]:
    """Run LASSO + CV per (timepoint, imputed dataset) and pool the supports."""
    seed_root = np.random.SeedSequence(config.seed)
    cv_seeds = {
        (month, d): child
        for (month, d), child in zip(
            [(month, d) for month in config.timepoints for d in range(imputation.m)],
            seed_root.spawn(len(config.timepoints) * imputation.m),
        )
    }

    tasks = []
    parents_by_cell: dict[tuple[int, int], tuple[str, ...]] = {}
    for month in config.timepoints:
        rows, twl = cohort.twl_at(month)
        for d, dataset in enumerate(imputation.datasets):
            table = dataset.feature_table()
            columns = {name: table[name] for name in screen.retained}
            X_raw, names, parents = _design_for(columns, rows)
            Xs, ys, std = standardize_design(X_raw, twl)
            parents_by_cell[(month, d)] = parents
            tasks.append((month, d, Xs, ys, names, std, config.cv_folds,
                          cv_seeds[(month, d)], config.cv_rule))

    fits: dict[tuple[int, int], LassoFit] = {}
    if config.threads > 1 and len(tasks) > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=config.threads) as pool:
            for month, d, fit in pool.map(_cv_task, tasks):
                fits[(month, d)] = fit
    else:
        for task in tasks:
            month, d, fit = _cv_task(task)
            fits[(month, d)] = fit

    per_timepoint: dict[int, frozenset[str]] = {}
    counts: dict[str, int] = {}
    for month in config.timepoints:
        month_fits = [(fits[(month, d)], parents_by_cell[(month, d)]) for d in range(imputation.m)]
        pooled_levels = pool_selected_features([f for f, _ in month_fits])
        parent_map = dict(zip(month_fits[0][0].feature_names, month_fits[0][1]))
        per_timepoint[month] = frozenset(parent_map[level] for level in pooled_levels.features)
        for fit, parents in month_fits:
            pmap = dict(zip(fit.feature_names, parents))
            for parent in {pmap[level] for level in fit.selected_features}:
                counts[parent] = counts.get(parent, 0) + 1

    total_fits = len(config.timepoints) * imputation.m
    frequency = {name: counts[name] / total_fits for name in sorted(counts)}
    selected = frozenset().union(*per_timepoint.values()) if per_timepoint else frozenset()
    return SelectionSummary(per_timepoint, frequency, selected), fits


def run_training_pipeline(cohort: Cohort, config: PipelineConfig | None = None) -> PipelineResult:
    """Screen, impute, select, pool, and train; fully seeded and deterministic."""
    config = config or PipelineConfig()
    screen = screen_features(cohort, config.max_missing_fraction)
    imputation = pmm_impute(cohort, m=config.m_imputations, donor_k=config.donor_k, seed=config.seed)
    selection, _ = select_features(cohort, imputation, screen, config)
    model, report = train_trajectory_model(
        cohort,
        selection.selected,
        seed=config.seed,
        params=config.tree_params,
        split=config.split,
        timepoints=config.timepoints,
    )
    return PipelineResult(screen, imputation, selection, model, report)
