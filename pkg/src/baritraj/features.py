"""Typed feature columns shared by the cohort, imputation, selection, and tree code.

A feature table is an ordered ``dict[str, FeatureColumn]`` whose arrays are all
aligned to the same patient order.  Numeric and boolean columns are float64
arrays with NaN marking missing cells; categorical columns are object arrays
with ``None`` marking missing cells.  Columns are frozen after construction so
tables can be shared across threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

NUMERIC = "numeric"
CATEGORICAL = "categorical"
BOOLEAN = "boolean"

_KINDS = (NUMERIC, CATEGORICAL, BOOLEAN)


@dataclass(frozen=True)
class FeatureColumn:
    """One baseline feature across the cohort.

    ``values`` is float64 (NaN = missing) for numeric and boolean kinds, and an
    object array of strings (None = missing) for categoricals.  Boolean columns
    store 0.0/1.0 so trees and linear predictors can treat them numerically.
    """

    name: str
    kind: str
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown feature kind {self.kind!r}")
        arr = np.asarray(self.values)
        if self.kind == CATEGORICAL:
            arr = arr.astype(object)
        else:
            arr = arr.astype(float)
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    def __len__(self) -> int:
        return len(self.values)

    @property
    def missing_mask(self) -> np.ndarray:
        if self.kind == CATEGORICAL:
            return np.array([v is None for v in self.values], dtype=bool)
        return np.isnan(self.values)

    @property
    def observed_mask(self) -> np.ndarray:
        return ~self.missing_mask

    @property
    def missing_fraction(self) -> float:
        return float(self.missing_mask.mean()) if len(self) else 0.0

    def observed_values(self) -> np.ndarray:
        return self.values[self.observed_mask]

    def levels(self) -> tuple:
        """Distinct observed values, sorted for determinism."""
        obs = self.observed_values()
        if self.kind == CATEGORICAL:
            return tuple(sorted({str(v) for v in obs}))
        return tuple(sorted({float(v) for v in obs}))

    def with_values(self, values: np.ndarray) -> "FeatureColumn":
        return FeatureColumn(self.name, self.kind, values)


def numeric_column(name: str, values) -> FeatureColumn:
    return FeatureColumn(name, NUMERIC, np.asarray(values, dtype=float))


def boolean_column(name: str, values) -> FeatureColumn:
    """Build a boolean column from bools/ints/None (None becomes NaN)."""
    out = np.array([np.nan if v is None else float(bool(v)) for v in values])
    return FeatureColumn(name, BOOLEAN, out)


def categorical_column(name: str, values) -> FeatureColumn:
    out = np.array([None if v is None else str(v) for v in values], dtype=object)
    return FeatureColumn(name, CATEGORICAL, out)


def one_hot(column: FeatureColumn) -> "dict[str, np.ndarray]":
    """Expand a categorical column into one indicator array per level.

    Missing cells become NaN in every indicator so downstream code can keep
    treating NaN as the single missing marker.  Level order follows
    ``column.levels()`` (sorted), and the returned dict preserves it.
    """
    if column.kind != CATEGORICAL:
        raise ValueError(f"one_hot expects a categorical column, got {column.kind}")
    missing = column.missing_mask
    out: dict[str, np.ndarray] = {}
    for level in column.levels():
        ind = np.array([float(v == level) if v is not None else np.nan for v in column.values])
        ind[missing] = np.nan
        out[f"{column.name}={level}"] = ind
    return out
