"""Residual diagnostics: day-of-week x hour heatmap and autocorrelation."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .loadgen import calendar_fields


class DegenerateInputError(ValueError):
    """Raised when a diagnostic is undefined for the given residuals."""


@dataclass(frozen=True, eq=False)
class ResidualSeries:
    timestamps: np.ndarray
    residuals: np.ndarray

    def __post_init__(self):
        ts = np.asarray(self.timestamps).astype("datetime64[s]")
        r = np.asarray(self.residuals, dtype=float)
        if ts.shape != r.shape or r.ndim != 1:
            raise ValueError("timestamps and residuals must be aligned 1-D arrays")
        if not np.all(np.isfinite(r)):
            raise ValueError("residuals must be finite")
        object.__setattr__(self, "timestamps", ts)
        object.__setattr__(self, "residuals", r)

    @classmethod
    def from_forecast(cls, timestamps, actual, predicted) -> "ResidualSeries":
        return cls(timestamps, np.asarray(actual, float) - np.asarray(predicted, float))

    def __len__(self) -> int:
        return self.residuals.size


@dataclass(frozen=True, eq=False)
class HeatmapGrid:
    """7 x 24 cell means and counts; rows are days (Mon=0), columns hours."""

    mean_residual: np.ndarray
    count: np.ndarray

    @property
    def empty(self) -> np.ndarray:
        return self.count == 0

    def rows(self):
        for d in range(7):
            for h in range(24):
                yield d, h, float(self.mean_residual[d, h]), int(self.count[d, h])


@dataclass(frozen=True, eq=False)
class AcfResult:
    lags: np.ndarray
    acf: np.ndarray
    confidence_halfwidth: float
    n: int

    @property
    def max_lag(self) -> int:
        return int(self.lags[-1])


def residual_heatmap(r: ResidualSeries) -> HeatmapGrid:
    if len(r) == 0:
        raise ValueError("no residuals")
    cal = calendar_fields(r.timestamps)
    cell = cal["day_of_week"] * 24 + cal["hour"]
    count = np.bincount(cell, minlength=168)
    total = np.bincount(cell, weights=r.residuals, minlength=168)
    mean = np.divide(total, count, out=np.zeros(168), where=count > 0)
    return HeatmapGrid(mean.reshape(7, 24), count.reshape(7, 24))


def autocorrelation(r: ResidualSeries | np.ndarray, max_lag: int = 50) -> AcfResult:
    """Biased (1/n) sample autocorrelation for lags 0..max_lag with a 1.96/sqrt(n) band."""
    x = r.residuals if isinstance(r, ResidualSeries) else np.asarray(r, dtype=float)
    n = x.size
    if max_lag < 0:
        raise ValueError("max_lag must be non-negative")
    if n <= max_lag:
        raise DegenerateInputError(f"need more than max_lag={max_lag} residuals, got {n}")
    d = x - x.mean()
    denom = float(d @ d)
    if denom <= 0.0:
        raise DegenerateInputError("residuals are constant; autocorrelation is undefined")
    acf = np.empty(max_lag + 1)
    acf[0] = 1.0
    for k in range(1, max_lag + 1):
        acf[k] = float(d[:n - k] @ d[k:]) / denom
    return AcfResult(np.arange(max_lag + 1), acf, 1.96 / math.sqrt(n), n)


def whiteness_summary(a: AcfResult) -> tuple[int, bool]:
    """Count lags 1..max_lag outside the band; white if at most ceil(10% of lags) exceed."""
    exceed = int(np.sum(np.abs(a.acf[1:]) > a.confidence_halfwidth))
    return exceed, exceed <= math.ceil(0.1 * a.max_lag)
