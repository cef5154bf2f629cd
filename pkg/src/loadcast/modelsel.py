"""Expanding-window cross-validation, grid search and the persistence baseline."""

from __future__ import annotations

import logging
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Union

import numpy as np

from .features import FeatureMatrix, Preprocessor, as_matrix
from .loadgen import HOUR, LoadSeries
from .metrics import MetricConfig, evaluate
from .svr import SvrModel, SvrParams, predict, train_svr

logger = logging.getLogger(__name__)

GammaValue = Union[float, str]


class ConvergenceWarning(UserWarning):
    pass


@dataclass(frozen=True, eq=False)
class TimeSeriesSplits:
    n_samples: int
    n_splits: int
    folds: list[tuple[np.ndarray, np.ndarray]]

    def __iter__(self):
        return iter(self.folds)

    def __len__(self) -> int:
        return len(self.folds)


def make_splits(n_samples: int, n_splits: int = 5) -> TimeSeriesSplits:
    """Fold k (1-based) trains on ``[0, k*v)`` and validates on ``[k*v, (k+1)*v)``.

    ``v = n_samples // (n_splits + 1)``; leftover samples join the last
    validation block.
    """
    if n_splits < 1:
        raise ValueError("n_splits must be >= 1")
    if n_samples < 2 * (n_splits + 1):
        raise ValueError(f"n_samples={n_samples} too small for {n_splits} splits "
                         f"(need >= {2 * (n_splits + 1)})")
    v = n_samples // (n_splits + 1)
    folds = []
    for k in range(1, n_splits + 1):
        stop = n_samples if k == n_splits else (k + 1) * v
        folds.append((np.arange(0, k * v), np.arange(k * v, stop)))
    return TimeSeriesSplits(n_samples, n_splits, folds)


@dataclass(frozen=True)
class GridSpec:
    c_values: tuple[float, ...] = (1.0, 10.0, 100.0)
    epsilon_values: tuple[float, ...] = (0.1, 0.5, 1.0)
    gamma_values: tuple[GammaValue, ...] = ("scale", 0.01, 0.1)

    def __post_init__(self):
        for name in ("c_values", "epsilon_values", "gamma_values"):
            values = tuple(getattr(self, name))
            if not values:
                raise ValueError(f"{name} must not be empty")
            object.__setattr__(self, name, values)
        if any(c <= 0 for c in self.c_values):
            raise ValueError("C values must be positive")
        if any(e < 0 for e in self.epsilon_values):
            raise ValueError("epsilon values must be non-negative")
        for g in self.gamma_values:
            if isinstance(g, str):
                if g != "scale":
                    raise ValueError(f"unknown symbolic gamma {g!r}")
            elif not g > 0:
                raise ValueError("gamma values must be positive")

    def cells(self) -> list[tuple[float, float, GammaValue]]:
        return [(c, e, g) for c in self.c_values for e in self.epsilon_values for g in self.gamma_values]

    def __len__(self) -> int:
        return len(self.c_values) * len(self.epsilon_values) * len(self.gamma_values)

    def to_dict(self) -> dict:
        return {"c_values": list(self.c_values), "epsilon_values": list(self.epsilon_values),
                "gamma_values": list(self.gamma_values)}

    @classmethod
    def from_dict(cls, d: dict) -> "GridSpec":
        return cls(tuple(d["c_values"]), tuple(d["epsilon_values"]), tuple(d["gamma_values"]))


def scale_gamma(Z) -> float:
    """``1 / (p * Var(Z))`` over all entries of the design matrix."""
    Z = as_matrix(Z)
    var = float(Z.var())
    return 1.0 / (Z.shape[1] * var) if var > 0 else 1.0


def resolve_gamma(gamma: GammaValue, Z) -> float:
    return scale_gamma(Z) if gamma == "scale" else float(gamma)


@dataclass(frozen=True)
class FoldScore:
    c: float
    epsilon: float
    gamma: GammaValue
    fold: int
    gamma_resolved: float
    val_mse: float
    val_composite: float | None
    converged: bool


@dataclass(frozen=True, eq=False)
class GridSearchResult:
    table: list[FoldScore]
    mean_mse: dict[tuple, float]
    best_params: tuple[float, float, GammaValue]
    best_model: SvrModel
    n_fits: int

    def cell_means(self) -> list[tuple[tuple, float]]:
        return list(self.mean_mse.items())


@dataclass(frozen=True)
class PipelineSettings:
    """Everything except (C, epsilon, gamma) needed to fit the SVR pipeline."""

    degree: int = 2
    include_interactions: bool = True
    tol: float = 1e-3
    max_iter: int = 1_000_000
    second_order: bool = True
    cache_mb: float = 512.0


def fit_pipeline(X: FeatureMatrix, y, c: float, epsilon: float, gamma: GammaValue,
                 settings: PipelineSettings = PipelineSettings()) -> SvrModel:
    """Standardize, expand and train on ``(X, y)``; ``gamma='scale'`` is resolved on this data."""
    pre = Preprocessor.fit(X, settings.degree, settings.include_interactions)
    Z = pre.transform(X)
    params = SvrParams(c=float(c), epsilon=float(epsilon), gamma=resolve_gamma(gamma, Z.values),
                       tol=settings.tol, max_iter=settings.max_iter,
                       second_order=settings.second_order, cache_mb=settings.cache_mb)
    model = train_svr(Z, y, params)
    return replace(model, preprocessing=pre, input_names=pre.input_names)


def _sort_key(cell, Z_full) -> tuple:
    c, e, g = cell
    return (c, e, resolve_gamma(g, Z_full))


def worker_count() -> int:
    raw = os.environ.get("LOADCAST_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ValueError(f"LOADCAST_THREADS must be an integer, got {raw!r}") from None


def grid_search(X: FeatureMatrix, y, grid: GridSpec, splits: TimeSeriesSplits | int = 5,
                timestamps=None, metric_config: MetricConfig | None = None,
                settings: PipelineSettings = PipelineSettings(),
                threads: int | None = None) -> GridSearchResult:
    """Exhaustive search over ``grid`` scored by mean validation MSE, then refit on all data.

    Ties on mean MSE go to the lexicographically smallest ``(C, epsilon, gamma)``.
    Non-converged fold models are kept and scored; a ConvergenceWarning is issued.
    """
    y = np.asarray(y, dtype=float)
    if len(X) != y.size:
        raise ValueError(f"{len(X)} feature rows but {y.size} targets")
    if isinstance(splits, int):
        splits = make_splits(len(X), splits)
    if splits.n_samples != len(X):
        raise ValueError("splits were built for a different sample count")

    cells = grid.cells()
    jobs = [(ci, fi) for ci in range(len(cells)) for fi in range(len(splits))]

    def run(job):
        ci, fi = job
        c, e, g = cells[ci]
        train_idx, val_idx = splits.folds[fi]
        model = fit_pipeline(X.rows(train_idx), y[train_idx], c, e, g, settings)
        pred = predict(model, X.rows(val_idx))
        resid = y[val_idx] - pred
        composite = None
        if timestamps is not None:
            rep = evaluate(y[val_idx], pred, np.asarray(timestamps)[val_idx], metric_config)
            composite = rep.composite
        return FoldScore(c, e, g, fi + 1, model.params.gamma, float(np.mean(resid * resid)),
                         composite, model.training_meta.converged)

    n_threads = threads if threads is not None else worker_count()
    if n_threads > 1:
        with ThreadPoolExecutor(max_workers=n_threads) as pool:
            table = list(pool.map(run, jobs))
    else:
        table = [run(job) for job in jobs]

    for row in table:
        if not row.converged:
            warnings.warn(f"solver did not converge for C={row.c}, epsilon={row.epsilon}, "
                          f"gamma={row.gamma}, fold {row.fold}", ConvergenceWarning, stacklevel=2)

    mean_mse: dict[tuple, float] = {}
    for ci, cell in enumerate(cells):
        scores = [row.val_mse for row in table[ci * len(splits):(ci + 1) * len(splits)]]
        mean_mse[cell] = float(np.mean(scores))

    Z_full = Preprocessor.fit(X, settings.degree, settings.include_interactions).transform(X).values
    best_value = min(mean_mse.values())
    best = min((cell for cell in cells if mean_mse[cell] == best_value), key=lambda cl: _sort_key(cl, Z_full))
    best_model = fit_pipeline(X, y, *best, settings)
    logger.info("grid search best C=%s eps=%s gamma=%s (mean val MSE %.4f)", *best, best_value)
    return GridSearchResult(table, mean_mse, best, best_model, len(jobs) + 1)


def persistence_forecast(history: LoadSeries, lag_hours: int = 24, horizon=None) -> np.ndarray:
    """Predict each horizon timestamp by the observation ``lag_hours`` earlier.

    ``horizon`` is either a LoadSeries of observed values (rolling evaluation:
    observations inside the horizon may be reused once they lie ``lag_hours``
    in the past) or bare timestamps, in which case only ``history`` is used.
    """
    if lag_hours < 1:
        raise ValueError("lag_hours must be >= 1")
    if isinstance(horizon, LoadSeries):
        target_ts = horizon.timestamps
        known_ts = np.concatenate([history.timestamps, horizon.timestamps])
        known_vals = np.concatenate([history.values, horizon.values])
    else:
        target_ts = np.asarray(horizon).astype("datetime64[s]")
        known_ts, known_vals = history.timestamps, history.values
    if known_ts.size == 0:
        raise ValueError("no observations to persist")
    ref = target_ts - lag_hours * HOUR
    offset = (ref - known_ts[0]) // HOUR
    offset = offset.astype(np.int64)
    ok = (offset >= 0) & (offset < known_ts.size)
    if not np.all(ok):
        missing = target_ts[~ok][0]
        raise ValueError(f"no observation {lag_hours} h before {missing}")
    if not np.all(known_ts[offset] == ref):
        raise ValueError("history and horizon do not form one contiguous hourly record")
    return known_vals[offset].copy()
