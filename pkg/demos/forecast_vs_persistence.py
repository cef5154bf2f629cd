"""Train an SVR on a year of synthetic load and compare it with persistence.

Skips the grid search and fits one model with the hyperparameters the
default grid tends to select, so it runs in seconds. The full default
experiment, with cross-validated selection, is ``loadcast run``.

Training data has to span the calendar the test set lives in: the features
are calendar fields, so a model trained on two summer months has no
information about the autumn weeks that follow.

    python demos/forecast_vs_persistence.py
"""

import numpy as np

from loadcast import (GeneratorConfig, evaluate, extract_features, generate_profile, improvement_report,
                      persistence_forecast, predict, split_train_test)
from loadcast.modelsel import fit_pipeline

series = generate_profile(GeneratorConfig(seed=7))
train, test = split_train_test(series, 0.2)
print(f"{len(train)} training hours, {len(test)} test hours")

model = fit_pipeline(extract_features(train), train.values, c=100.0, epsilon=0.1, gamma=0.01)
meta = model.training_meta
print(f"{meta.n_support} support vectors, {meta.iterations} solver iterations, gap {meta.duality_gap:.2e}")

svr_pred = predict(model, extract_features(test))
base_pred = persistence_forecast(train, 24, test)

svr = evaluate(test.values, svr_pred, test.timestamps, model="svr")
base = evaluate(test.values, base_pred, test.timestamps, model="persistence")
report = improvement_report(base, svr)
print(f"{'metric':<14}{'svr':>10}{'persistence':>14}{'reduction %':>14}")
for name, pct in report.reduction_pct.items():
    print(f"{name:<14}{svr.values()[name]:>10.3f}{base.values()[name]:>14.3f}{pct:>14.1f}")

resid = test.values - svr_pred
print(f"mean residual {resid.mean():+.3f} MW, largest miss {np.abs(resid).max():.2f} MW")
