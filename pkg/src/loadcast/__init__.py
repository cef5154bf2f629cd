"""Hourly load forecasting with an RBF support vector regressor."""

__version__ = "0.1.0"

from .diagnostics import (AcfResult, DegenerateInputError, HeatmapGrid, ResidualSeries, autocorrelation,
                          residual_heatmap, whiteness_summary)
from .experiment import ExperimentConfig, ExperimentSummary, PhaseError, run_experiment
from .features import (FEATURE_NAMES, FeatureMatrix, PolynomialExpander, Preprocessor, Standardizer,
                       apply_standardizer, expand_polynomial, extract_features, fit_standardizer)
from .gridimpact import (GridImpactReport, ImpactSettings, Line, NetworkModel, PowerFlowResult,
                         build_kerber_feeder, impact_report, run_power_flow)
from .loadgen import GeneratorConfig, LoadSeries, generate_profile, split_train_test
from .metrics import (MetricConfig, MetricsReport, asymmetric_error, composite_metric, evaluate,
                      improvement_report, standard_metrics, time_weighted_error)
from .modelsel import GridSpec, grid_search, make_splits, persistence_forecast
from .svr import SvrModel, SvrParams, load_model, predict, save_model, train_svr

__all__ = [
    "AcfResult", "DegenerateInputError", "HeatmapGrid", "ResidualSeries", "autocorrelation",
    "residual_heatmap", "whiteness_summary",
    "ExperimentConfig", "ExperimentSummary", "PhaseError", "run_experiment",
    "FEATURE_NAMES", "FeatureMatrix", "PolynomialExpander", "Preprocessor", "Standardizer",
    "apply_standardizer", "expand_polynomial", "extract_features", "fit_standardizer",
    "GridImpactReport", "ImpactSettings", "Line", "NetworkModel", "PowerFlowResult",
    "build_kerber_feeder", "impact_report", "run_power_flow",
    "GeneratorConfig", "LoadSeries", "generate_profile", "split_train_test",
    "MetricConfig", "MetricsReport", "asymmetric_error", "composite_metric", "evaluate",
    "improvement_report", "standard_metrics", "time_weighted_error",
    "GridSpec", "grid_search", "make_splits", "persistence_forecast",
    "SvrModel", "SvrParams", "load_model", "predict", "save_model", "train_svr",
]
