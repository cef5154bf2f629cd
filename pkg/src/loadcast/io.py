"""Plain-text artifact formats (CSV and JSON)."""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .diagnostics import AcfResult, HeatmapGrid
from .gridimpact import GridImpactReport
from .loadgen import LoadSeries, format_timestamp, to_datetime64
from .metrics import ImprovementReport, MetricsReport
from .modelsel import GridSearchResult


def write_json(path, obj) -> Path:
    path = Path(path)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")
    return path


def read_json(path):
    return json.loads(Path(path).read_text())


def _write_rows(path, header, rows) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    return path


def write_series_csv(series: LoadSeries, path) -> Path:
    rows = ((format_timestamp(t), f"{v:.6f}") for t, v in zip(series.timestamps, series.values))
    return _write_rows(path, ["timestamp", "load_mw"], rows)


def read_series_csv(path) -> LoadSeries:
    with Path(path).open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != ["timestamp", "load_mw"]:
            raise ValueError(f"{path}: unexpected header {header}")
        ts, vals = [], []
        for row in reader:
            ts.append(to_datetime64(row[0]))
            vals.append(float(row[1]))
    return LoadSeries(np.array(ts, dtype="datetime64[s]"), np.array(vals))


def write_metrics_json(report: MetricsReport, path) -> Path:
    return write_json(path, report.to_dict())


def read_metrics_json(path) -> MetricsReport:
    return MetricsReport.from_dict(read_json(path))


def write_comparison_csv(report: ImprovementReport, path) -> Path:
    rows = ((m, f"{svr:.6f}", f"{base:.6f}", f"{pct:.4f}") for m, svr, base, pct in report.rows())
    return _write_rows(path, ["metric", "svr", "persistence", "reduction_pct"], rows)


def write_grid_csv(result: GridSearchResult, path) -> Path:
    rows = ((r.c, r.epsilon, r.gamma, r.fold, f"{r.val_mse:.10g}") for r in result.table)
    return _write_rows(path, ["c", "epsilon", "gamma", "fold", "val_mse"], rows)


def grid_summary(result: GridSearchResult) -> dict:
    c, e, g = result.best_params
    meta = result.best_model.training_meta
    cells = []
    n_folds = len(result.table) // len(result.mean_mse)
    for k, (cell, mean) in enumerate(result.mean_mse.items()):
        rows = result.table[k * n_folds:(k + 1) * n_folds]
        composite = [r.val_composite for r in rows]
        cells.append({"c": cell[0], "epsilon": cell[1], "gamma": cell[2], "mean_val_mse": mean,
                      "mean_val_composite": None if None in composite else float(np.mean(composite)),
                      "all_converged": all(r.converged for r in rows)})
    return {
        "best_params": {"c": c, "epsilon": e, "gamma": g, "gamma_resolved": result.best_model.params.gamma},
        "best_mean_val_mse": result.mean_mse[result.best_params],
        "n_fits": result.n_fits,
        "cells": cells,
        "refit": {"iterations": meta.iterations, "duality_gap": meta.duality_gap,
                  "n_support": meta.n_support, "converged": meta.converged},
    }


def write_heatmap_csv(grid: HeatmapGrid, path) -> Path:
    rows = ((d, h, f"{m:.6f}", c) for d, h, m, c in grid.rows())
    return _write_rows(path, ["day_of_week", "hour", "mean_residual", "count"], rows)


def write_acf_csv(acf: AcfResult, path) -> Path:
    rows = ((int(k), f"{v:.10f}", f"{acf.confidence_halfwidth:.10f}") for k, v in zip(acf.lags, acf.acf))
    return _write_rows(path, ["lag", "acf", "conf_halfwidth"], rows)


def write_impact_csv(report: GridImpactReport, path) -> Path:
    rows = ((format_timestamp(t), f"{va:.8f}", f"{vf:.8f}", f"{la:.6f}", f"{lf:.6f}", int(xa), int(xf))
            for t, va, vf, la, lf, xa, xf in zip(
                report.timestamps, report.min_v_actual, report.min_v_forecast,
                report.max_loading_actual, report.max_loading_forecast,
                report.violation_actual, report.violation_forecast))
    return _write_rows(path, ["timestamp", "min_v_actual", "min_v_forecast", "max_loading_actual",
                              "max_loading_forecast", "violation_actual", "violation_forecast"], rows)
