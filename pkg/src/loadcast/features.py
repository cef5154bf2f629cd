"""Calendar features and the fitted preprocessing chain.

The chain is always extract -> standardize -> polynomial expansion, and the
objects fitted on the training slice are reused unchanged on test data.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations_with_replacement
from typing import Sequence

import numpy as np

from .loadgen import LoadSeries, calendar_fields

FEATURE_NAMES = (
    "hour", "day_of_week", "day_of_year", "month", "is_weekend",
    "sin_hour", "cos_hour", "sin_doy", "cos_doy",
)


@dataclass(frozen=True, eq=False)
class FeatureMatrix:
    column_names: tuple[str, ...]
    values: np.ndarray

    def __post_init__(self):
        names = tuple(self.column_names)
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2 or values.shape[1] != len(names):
            raise ValueError(f"matrix of shape {values.shape} does not match {len(names)} column names")
        if len(set(names)) != len(names):
            raise ValueError("duplicate column names")
        if not np.all(np.isfinite(values)):
            raise ValueError("feature matrix contains non-finite entries")
        object.__setattr__(self, "column_names", names)
        object.__setattr__(self, "values", values)

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def __len__(self) -> int:
        return self.values.shape[0]

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)

    def rows(self, index) -> "FeatureMatrix":
        return FeatureMatrix(self.column_names, self.values[index])


def as_matrix(X) -> np.ndarray:
    """Plain 2-D float array from a FeatureMatrix or array-like."""
    values = X.values if isinstance(X, FeatureMatrix) else np.asarray(X, dtype=float)
    if values.ndim == 1:
        values = values[:, None]
    return values


def extract_features(series: LoadSeries) -> FeatureMatrix:
    """One row of calendar and cyclic features per timestamp."""
    if len(series) == 0:
        raise ValueError("cannot extract features from an empty series")
    cal = calendar_fields(series.timestamps)
    h = cal["hour"].astype(float)
    d = cal["day_of_year"].astype(float)
    columns = [
        h,
        cal["day_of_week"].astype(float),
        d,
        cal["month"].astype(float),
        (cal["day_of_week"] >= 5).astype(float),
        np.sin(2 * np.pi * h / 24),
        np.cos(2 * np.pi * h / 24),
        np.sin(2 * np.pi * d / 365.25),
        np.cos(2 * np.pi * d / 365.25),
    ]
    return FeatureMatrix(FEATURE_NAMES, np.column_stack(columns))


@dataclass(frozen=True, eq=False)
class Standardizer:
    """Per-column mean and population standard deviation.

    Constant columns store a standard deviation of 1 so they map to zeros.
    """

    column_names: tuple[str, ...]
    means: np.ndarray
    stddevs: np.ndarray

    def transform(self, X: FeatureMatrix) -> FeatureMatrix:
        return apply_standardizer(self, X)

    def inverse(self, X: FeatureMatrix) -> FeatureMatrix:
        return FeatureMatrix(X.column_names, X.values * self.stddevs + self.means)

    def to_dict(self) -> dict:
        return {"column_names": list(self.column_names),
                "means": self.means.tolist(), "stddevs": self.stddevs.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "Standardizer":
        return cls(tuple(d["column_names"]), np.asarray(d["means"], dtype=float),
                   np.asarray(d["stddevs"], dtype=float))


def fit_standardizer(X: FeatureMatrix) -> Standardizer:
    values = as_matrix(X)
    if values.shape[0] < 2:
        raise ValueError("need at least two rows to fit a standardizer")
    constant = np.ptp(values, axis=0) == 0
    # exact centre for constant columns so they map to exactly zero
    means = np.where(constant, values[0], values.mean(axis=0))
    stddevs = values.std(axis=0)
    # the spread can also underflow to zero for denormal-scale columns
    stddevs = np.where(constant | (stddevs == 0), 1.0, stddevs)
    names = X.column_names if isinstance(X, FeatureMatrix) else tuple(f"x{j}" for j in range(values.shape[1]))
    return Standardizer(tuple(names), means, stddevs)


def apply_standardizer(s: Standardizer, X: FeatureMatrix) -> FeatureMatrix:
    if X.shape[1] != s.means.size:
        raise ValueError(f"expected {s.means.size} columns, got {X.shape[1]}")
    if tuple(X.column_names) != s.column_names:
        raise ValueError("column order differs from the fitted matrix")
    return FeatureMatrix(X.column_names, (X.values - s.means) / s.stddevs)


@dataclass(frozen=True)
class PolynomialExpander:
    """Original columns followed by monomials of degree 2..degree.

    With ``include_interactions=False`` only pure powers ``x_i**k`` are added.
    No constant column is produced.
    """

    input_names: tuple[str, ...]
    degree: int = 2
    include_interactions: bool = True

    def __post_init__(self):
        if self.degree < 1:
            raise ValueError("degree must be >= 1")
        object.__setattr__(self, "input_names", tuple(self.input_names))

    @property
    def terms(self) -> list[tuple[int, ...]]:
        p = len(self.input_names)
        out: list[tuple[int, ...]] = [(j,) for j in range(p)]
        for k in range(2, self.degree + 1):
            if self.include_interactions:
                out.extend(combinations_with_replacement(range(p), k))
            else:
                out.extend((j,) * k for j in range(p))
        return out

    @property
    def output_names(self) -> tuple[str, ...]:
        names = []
        for term in self.terms:
            if len(term) == 1:
                names.append(self.input_names[term[0]])
                continue
            counts: dict[int, int] = {}
            for j in term:
                counts[j] = counts.get(j, 0) + 1
            names.append("*".join(self.input_names[j] if c == 1 else f"{self.input_names[j]}^{c}"
                                  for j, c in counts.items()))
        return tuple(names)

    def to_dict(self) -> dict:
        return {"input_names": list(self.input_names), "degree": self.degree,
                "include_interactions": self.include_interactions}

    @classmethod
    def from_dict(cls, d: dict) -> "PolynomialExpander":
        return cls(tuple(d["input_names"]), int(d["degree"]), bool(d["include_interactions"]))


def expand_polynomial(e: PolynomialExpander, X: FeatureMatrix) -> FeatureMatrix:
    if tuple(X.column_names) != e.input_names:
        raise ValueError("columns do not match the expander's input names")
    values = X.values
    columns = []
    for term in e.terms:
        col = values[:, term[0]].copy()
        for j in term[1:]:
            col *= values[:, j]
        columns.append(col)
    return FeatureMatrix(e.output_names, np.column_stack(columns))


@dataclass(frozen=True)
class Preprocessor:
    """Fitted standardizer plus expander; turns raw features into the SVR design matrix."""

    standardizer: Standardizer
    expander: PolynomialExpander

    @classmethod
    def fit(cls, X: FeatureMatrix, degree: int = 2, include_interactions: bool = True) -> "Preprocessor":
        s = fit_standardizer(X)
        return cls(s, PolynomialExpander(s.column_names, degree, include_interactions))

    @property
    def input_names(self) -> tuple[str, ...]:
        return self.standardizer.column_names

    def transform(self, X: FeatureMatrix) -> FeatureMatrix:
        return expand_polynomial(self.expander, apply_standardizer(self.standardizer, X))

    def to_dict(self) -> dict:
        return {"standardizer": self.standardizer.to_dict(), "expander": self.expander.to_dict()}

    @classmethod
    def from_dict(cls, d: dict) -> "Preprocessor":
        return cls(Standardizer.from_dict(d["standardizer"]), PolynomialExpander.from_dict(d["expander"]))


def feature_matrix(values, names: Sequence[str] | None = None) -> FeatureMatrix:
    """Wrap a raw array, naming columns ``x0, x1, ...`` when no names are given."""
    values = as_matrix(values)
    if names is None:
        names = tuple(f"x{j}" for j in range(values.shape[1]))
    return FeatureMatrix(tuple(names), values)
