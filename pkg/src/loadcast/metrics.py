"""Forecast error metrics.

Errors are ``actual - predicted`` throughout, so a positive error is an
under-prediction. The weighted metrics divide by the sample count rather
than the weight total; with unit weights they reduce to MAE exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .loadgen import calendar_fields

DEFAULT_PEAK_HOURS = frozenset({6, 7, 8, 9, 17, 18, 19, 20, 21, 22})
METRIC_NAMES = ("mse", "mae", "rmse", "asymmetric", "time_weighted", "composite")


@dataclass(frozen=True)
class MetricConfig:
    under_penalty: float = 2.0
    peak_hours: frozenset = DEFAULT_PEAK_HOURS
    peak_weight: float = 2.0
    composite_weights: tuple[float, float] = (0.5, 0.5)

    def __post_init__(self):
        object.__setattr__(self, "peak_hours", frozenset(int(h) for h in self.peak_hours))
        object.__setattr__(self, "composite_weights", tuple(float(w) for w in self.composite_weights))
        if self.under_penalty < 1:
            raise ValueError("under_penalty must be >= 1")
        if self.peak_weight < 1:
            raise ValueError("peak_weight must be >= 1")
        if not all(0 <= h <= 23 for h in self.peak_hours):
            raise ValueError("peak hours must lie in 0..23")
        _check_weights(*self.composite_weights)

    def to_dict(self) -> dict:
        return {"under_penalty": self.under_penalty, "peak_hours": sorted(self.peak_hours),
                "peak_weight": self.peak_weight, "composite_weights": list(self.composite_weights)}

    @classmethod
    def from_dict(cls, d: dict) -> "MetricConfig":
        return cls(under_penalty=d["under_penalty"], peak_hours=frozenset(d["peak_hours"]),
                   peak_weight=d["peak_weight"], composite_weights=tuple(d["composite_weights"]))


@dataclass(frozen=True)
class MetricsReport:
    mse: float
    mae: float
    rmse: float
    asymmetric: float
    time_weighted: float
    composite: float
    n: int
    config: MetricConfig = field(default_factory=MetricConfig)
    model: str = ""

    def values(self) -> dict[str, float]:
        return {name: getattr(self, name) for name in METRIC_NAMES}

    def to_dict(self) -> dict:
        return {"model": self.model, "n": self.n, **self.values(), "config": self.config.to_dict()}

    @classmethod
    def from_dict(cls, d: dict) -> "MetricsReport":
        return cls(**{k: d[k] for k in METRIC_NAMES}, n=d["n"],
                   config=MetricConfig.from_dict(d["config"]), model=d.get("model", ""))


@dataclass(frozen=True)
class ImprovementReport:
    baseline: dict[str, float]
    model: dict[str, float]
    reduction_pct: dict[str, float]

    def rows(self) -> list[tuple[str, float, float, float]]:
        return [(m, self.model[m], self.baseline[m], self.reduction_pct[m]) for m in METRIC_NAMES]


def _check_weights(w_a: float, w_t: float) -> None:
    if w_a < 0 or w_t < 0 or not math.isclose(w_a + w_t, 1.0, rel_tol=0, abs_tol=1e-12):
        raise ValueError(f"composite weights must be non-negative and sum to 1, got ({w_a}, {w_t})")


def _errors(actual, predicted) -> np.ndarray:
    actual = np.asarray(actual, dtype=float).ravel()
    predicted = np.asarray(predicted, dtype=float).ravel()
    if actual.shape != predicted.shape:
        raise ValueError(f"length mismatch: {actual.size} actual vs {predicted.size} predicted")
    if actual.size == 0:
        raise ValueError("no samples")
    return actual - predicted


def standard_metrics(actual, predicted) -> tuple[float, float, float]:
    e = _errors(actual, predicted)
    mse = float(np.mean(e * e))
    return mse, float(np.mean(np.abs(e))), math.sqrt(mse)


def asymmetric_error(actual, predicted, under_penalty: float = 2.0) -> float:
    """Mean absolute error with under-predictions weighted by ``under_penalty``."""
    if under_penalty < 1:
        raise ValueError("under_penalty must be >= 1")
    e = _errors(actual, predicted)
    w = np.where(e > 0, under_penalty, 1.0)
    return float(np.mean(w * np.abs(e)))


def time_weighted_error(actual, predicted, timestamps, peak_hours=DEFAULT_PEAK_HOURS,
                        peak_weight: float = 2.0) -> float:
    """Mean absolute error with samples in ``peak_hours`` weighted by ``peak_weight``."""
    if peak_weight < 1:
        raise ValueError("peak_weight must be >= 1")
    e = _errors(actual, predicted)
    timestamps = np.asarray(timestamps)
    if timestamps.shape != e.shape:
        raise ValueError("timestamps are not aligned with the errors")
    hours = calendar_fields(timestamps)["hour"]
    peak = np.isin(hours, np.fromiter(peak_hours, dtype=np.int64, count=len(peak_hours)))
    w = np.where(peak, peak_weight, 1.0)
    return float(np.mean(w * np.abs(e)))


def composite_metric(asym: float, tw: float, w_a: float = 0.5, w_t: float = 0.5) -> float:
    _check_weights(w_a, w_t)
    return w_a * asym + w_t * tw


def evaluate(actual, predicted, timestamps, config: MetricConfig | None = None,
             model: str = "") -> MetricsReport:
    """All six metrics for one forecast."""
    config = config or MetricConfig()
    mse, mae, rmse = standard_metrics(actual, predicted)
    asym = asymmetric_error(actual, predicted, config.under_penalty)
    tw = time_weighted_error(actual, predicted, timestamps, config.peak_hours, config.peak_weight)
    comp = composite_metric(asym, tw, *config.composite_weights)
    return MetricsReport(mse, mae, rmse, asym, tw, comp, int(np.size(actual)), config, model)


def reduction_pct(baseline: float, value: float) -> float:
    if baseline == 0:
        return math.nan
    return 100.0 * (baseline - value) / baseline


def improvement_report(baseline: MetricsReport, model: MetricsReport) -> ImprovementReport:
    if baseline.config != model.config:
        raise ValueError("reports were computed with different metric configurations")
    if baseline.n != model.n:
        raise ValueError(f"reports cover different sample counts ({baseline.n} vs {model.n})")
    base, mod = baseline.values(), model.values()
    return ImprovementReport(base, mod, {m: reduction_pct(base[m], mod[m]) for m in METRIC_NAMES})
