"""End-to-end experiment: generate, train, evaluate, diagnose, simulate the feeder.

Each phase reads its inputs from the output directory, so a full run and
the same phases chained one by one produce identical files.
"""

from __future__ import annotations

import copy
import hashlib
import json
import logging
import platform
from dataclasses import asdict, dataclass, field, replace
from importlib import metadata
from pathlib import Path

from . import io
from .diagnostics import (DegenerateInputError, ResidualSeries, autocorrelation, residual_heatmap,
                          whiteness_summary)
from .features import extract_features
from .gridimpact import ImpactSettings, build_kerber_feeder, impact_report
from .loadgen import PRNG_NAME, GeneratorConfig, LoadSeries, generate_profile, split_train_test
from .metrics import MetricConfig, evaluate, improvement_report
from .modelsel import GridSpec, PipelineSettings, grid_search, persistence_forecast
from .svr import SvrModel, load_model, predict, save_model

logger = logging.getLogger(__name__)

ARTIFACTS = {
    "series": "load_series.csv",
    "model": "model.json",
    "grid": "grid_search.csv",
    "metrics_svr": "metrics_svr.json",
    "metrics_persistence": "metrics_persistence.json",
    "comparison": "comparison.csv",
    "heatmap": "residual_heatmap.csv",
    "acf": "acf.csv",
    "impact": "grid_impact.csv",
}
SIDECARS = {
    "series_meta": "load_series.meta.json",
    "grid_summary": "grid_summary.json",
    "impact_summary": "grid_impact_summary.json",
}
MANIFEST = "manifest.json"
PARTIAL_MARKER = ".partial"

# which subcommand writes each file
PRODUCER = {
    "series": "generate", "series_meta": "generate",
    "model": "train", "grid": "train", "grid_summary": "train",
    "metrics_svr": "evaluate", "metrics_persistence": "evaluate", "comparison": "evaluate",
    "heatmap": "diagnose", "acf": "diagnose",
    "impact": "gridsim", "impact_summary": "gridsim",
}


class ConfigError(ValueError):
    """Invalid experiment configuration."""


class MissingArtifactError(FileNotFoundError):
    def __init__(self, path: Path, producer: str):
        super().__init__(f"missing artifact {path}; run `loadcast {producer}` first")
        self.path = path
        self.producer = producer


class PhaseError(RuntimeError):
    def __init__(self, phase: str, cause: BaseException):
        super().__init__(f"[{phase}] {type(cause).__name__}: {cause}")
        self.phase = phase
        self.cause = cause


INPUT_ERRORS = (ConfigError, MissingArtifactError, DegenerateInputError)


def phase_seed(global_seed: int, tag: str) -> int:
    """Deterministic 64-bit sub-seed for one named phase."""
    digest = hashlib.sha256(f"{int(global_seed)}:{tag}".encode()).digest()
    return int.from_bytes(digest[:8], "little")


@dataclass(frozen=True)
class FeederSettings:
    n_loads: int = 14
    line_length_m: float = 30.0
    power_factor: float = 0.95

    def __post_init__(self):
        if self.n_loads < 1:
            raise ConfigError("n_loads must be >= 1")
        if not self.line_length_m > 0:
            raise ConfigError("line_length_m must be positive")
        if not 0 < self.power_factor <= 1:
            raise ConfigError("power_factor must be in (0, 1]")


@dataclass(frozen=True)
class ExperimentConfig:
    generator: GeneratorConfig = field(default_factory=GeneratorConfig)
    test_fraction: float = 0.2
    cv_splits: int = 5
    grid: GridSpec = field(default_factory=GridSpec)
    pipeline: PipelineSettings = field(default_factory=PipelineSettings)
    metric_config: MetricConfig = field(default_factory=MetricConfig)
    persistence_lag_hours: int = 24
    max_lag: int = 50
    feeder: FeederSettings = field(default_factory=FeederSettings)
    impact: ImpactSettings = field(default_factory=ImpactSettings)
    output_dir: str = "loadcast_output"
    global_seed: int = 42

    def __post_init__(self):
        if not 0 < self.test_fraction < 1:
            raise ConfigError("test_fraction must lie strictly between 0 and 1")
        if self.cv_splits < 1:
            raise ConfigError("cv_splits must be >= 1")
        if self.persistence_lag_hours < 1:
            raise ConfigError("persistence_lag_hours must be >= 1")
        if self.max_lag < 0:
            raise ConfigError("max_lag must be >= 0")
        if not 0 <= int(self.global_seed) < 2**64:
            raise ConfigError("global_seed must be an unsigned 64-bit integer")

    def generator_config(self) -> GeneratorConfig:
        """Generator settings with the seed derived from ``global_seed``."""
        return replace(self.generator, seed=phase_seed(self.global_seed, "generate"))

    def to_dict(self) -> dict:
        gen = self.generator.to_dict()
        del gen["seed"]
        return {
            "generator": gen,
            "test_fraction": self.test_fraction,
            "cv_splits": self.cv_splits,
            "grid": self.grid.to_dict(),
            "pipeline": asdict(self.pipeline),
            "metrics": self.metric_config.to_dict(),
            "persistence_lag_hours": self.persistence_lag_hours,
            "diagnostics": {"max_lag": self.max_lag},
            "gridimpact": {**asdict(self.feeder), **asdict(self.impact)},
            "output_dir": str(self.output_dir),
            "global_seed": int(self.global_seed),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        merged = _merge(cls().to_dict(), d)
        try:
            gen = merged["generator"]
            if "seed" in gen:
                raise ConfigError("generator.seed is derived from global_seed; set global_seed instead")
            gi = merged["gridimpact"]
            feeder_keys = {f for f in FeederSettings.__dataclass_fields__}
            return cls(
                generator=GeneratorConfig(**gen),
                test_fraction=float(merged["test_fraction"]),
                cv_splits=int(merged["cv_splits"]),
                grid=GridSpec.from_dict(merged["grid"]),
                pipeline=PipelineSettings(**merged["pipeline"]),
                metric_config=MetricConfig.from_dict(merged["metrics"]),
                persistence_lag_hours=int(merged["persistence_lag_hours"]),
                max_lag=int(merged["diagnostics"]["max_lag"]),
                feeder=FeederSettings(**{k: v for k, v in gi.items() if k in feeder_keys}),
                impact=ImpactSettings(**{k: v for k, v in gi.items() if k not in feeder_keys}),
                output_dir=str(merged["output_dir"]),
                global_seed=int(merged["global_seed"]),
            )
        except ConfigError:
            raise
        except (TypeError, ValueError, KeyError) as exc:
            raise ConfigError(f"invalid configuration: {exc}") from exc

    def hash(self) -> str:
        """Digest of the canonical config; the output location is not part of it."""
        d = self.to_dict()
        del d["output_dir"]
        return _sha256_text(_canonical(d))


def _merge(base: dict, override: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        where = f"{path}{key}"
        if key not in base:
            if path == "generator." and key == "seed":
                out[key] = value
                continue
            raise ConfigError(f"unknown config key {where!r}")
        if isinstance(base[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(f"config key {where!r} must be an object")
            out[key] = _merge(base[key], value, where + ".")
        else:
            out[key] = value
    return out


def _canonical(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def _sha256_text(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()


def sha256_file(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def versions() -> dict:
    out = {"python": platform.python_version()}
    for pkg in ("numpy", "scipy", "numba"):
        try:
            out[pkg] = metadata.version(pkg)
        except metadata.PackageNotFoundError:
            out[pkg] = None
    from . import __version__
    out["loadcast"] = __version__
    return out


def artifact_path(config: ExperimentConfig, key: str) -> Path:
    name = ARTIFACTS.get(key) or SIDECARS[key]
    return Path(config.output_dir) / name


def _require(config: ExperimentConfig, key: str) -> Path:
    path = artifact_path(config, key)
    if not path.is_file():
        raise MissingArtifactError(path, PRODUCER[key])
    return path


# ---- phases -----------------------------------------------------------------

def phase_generate(config: ExperimentConfig) -> LoadSeries:
    gen = config.generator_config()
    series = generate_profile(gen)
    io.write_series_csv(series, artifact_path(config, "series"))
    io.write_json(artifact_path(config, "series_meta"),
                  {"generator": gen.to_dict(), "prng": PRNG_NAME, "global_seed": int(config.global_seed),
                   "n": len(series)})
    return series


def load_series(config: ExperimentConfig) -> LoadSeries:
    return io.read_series_csv(_require(config, "series"))


def load_trained_model(config: ExperimentConfig) -> SvrModel:
    return load_model(_require(config, "model"))


def split(config: ExperimentConfig, series: LoadSeries) -> tuple[LoadSeries, LoadSeries]:
    return split_train_test(series, config.test_fraction)


def phase_train(config: ExperimentConfig, series: LoadSeries):
    train, _ = split(config, series)
    X = extract_features(train)
    result = grid_search(X, train.values, config.grid, config.cv_splits, timestamps=train.timestamps,
                         metric_config=config.metric_config, settings=config.pipeline)
    io.write_grid_csv(result, artifact_path(config, "grid"))
    io.write_json(artifact_path(config, "grid_summary"), io.grid_summary(result))
    save_model(result.best_model, artifact_path(config, "model"))
    return result


def _svr_test_forecast(config, series, model):
    _, test = split(config, series)
    return test, predict(model, extract_features(test))


def phase_evaluate(config: ExperimentConfig, series: LoadSeries, model: SvrModel):
    train, test = split(config, series)
    svr_pred = predict(model, extract_features(test))
    base_pred = persistence_forecast(train, config.persistence_lag_hours, horizon=test)
    svr_rep = evaluate(test.values, svr_pred, test.timestamps, config.metric_config, model="svr")
    base_rep = evaluate(test.values, base_pred, test.timestamps, config.metric_config,
                        model=f"persistence_lag{config.persistence_lag_hours}")
    comparison = improvement_report(base_rep, svr_rep)
    io.write_metrics_json(svr_rep, artifact_path(config, "metrics_svr"))
    io.write_metrics_json(base_rep, artifact_path(config, "metrics_persistence"))
    io.write_comparison_csv(comparison, artifact_path(config, "comparison"))
    return svr_rep, base_rep, comparison


def phase_diagnose(config: ExperimentConfig, series: LoadSeries, model: SvrModel):
    test, pred = _svr_test_forecast(config, series, model)
    resid = ResidualSeries.from_forecast(test.timestamps, test.values, pred)
    heat = residual_heatmap(resid)
    acf = autocorrelation(resid, config.max_lag)
    io.write_heatmap_csv(heat, artifact_path(config, "heatmap"))
    io.write_acf_csv(acf, artifact_path(config, "acf"))
    return heat, acf


def phase_gridsim(config: ExperimentConfig, series: LoadSeries, model: SvrModel):
    test, svr_pred = _svr_test_forecast(config, series, model)
    train, _ = split(config, series)
    base_pred = persistence_forecast(train, config.persistence_lag_hours, horizon=test)
    f = config.feeder
    net = build_kerber_feeder(f.n_loads, f.line_length_m, f.power_factor)
    svr_impact = impact_report(net, test, svr_pred, settings=config.impact)
    base_impact = impact_report(net, test, base_pred, settings=config.impact)
    io.write_impact_csv(svr_impact, artifact_path(config, "impact"))
    io.write_json(artifact_path(config, "impact_summary"),
                  {"svr": svr_impact.summary(), "persistence": base_impact.summary(),
                   "settings": {**asdict(f), **asdict(config.impact)}})
    return svr_impact, base_impact


# ---- orchestration ----------------------------------------------------------

class _Partial:
    """Leaves a ``.partial`` marker in the output directory unless the block succeeds."""

    def __init__(self, config: ExperimentConfig):
        self.out = Path(config.output_dir)

    def __enter__(self):
        try:
            self.out.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise ConfigError(f"cannot create output directory {self.out}: {exc}") from exc
        (self.out / PARTIAL_MARKER).write_text("in progress\n")
        return self

    def __exit__(self, exc_type, exc, tb):
        marker = self.out / PARTIAL_MARKER
        if exc is None:
            marker.unlink(missing_ok=True)
        else:
            marker.write_text(f"{exc}\n")
        return False


def run_phase(name: str, fn, *args):
    logger.info("phase %s", name)
    try:
        return fn(*args)
    except PhaseError:
        raise
    except Exception as exc:
        raise PhaseError(name, exc) from exc


def run_subcommand(config: ExperimentConfig, name: str):
    """Run one phase from the artifacts already present in ``config.output_dir``."""
    with _Partial(config):
        if name == "generate":
            return run_phase("generate", phase_generate, config)
        series = run_phase(name, load_series, config)
        if name == "train":
            return run_phase("train", phase_train, config, series)
        model = run_phase(name, load_trained_model, config)
        fn = {"evaluate": phase_evaluate, "diagnose": phase_diagnose, "gridsim": phase_gridsim}.get(name)
        if fn is None:
            raise ValueError(f"unknown phase {name!r}")
        return run_phase(name, fn, config, series, model)


@dataclass(frozen=True)
class ExperimentSummary:
    output_dir: Path
    manifest_path: Path
    manifest_hash: str
    artifacts: dict[str, Path]
    headline: dict


def build_manifest(config: ExperimentConfig, headline: dict) -> dict:
    def entries(table):
        return [{"key": k, "file": name, "sha256": sha256_file(Path(config.output_dir) / name)}
                for k, name in table.items()]

    body = {
        "config": {k: v for k, v in config.to_dict().items() if k != "output_dir"},
        "config_hash": config.hash(),
        "artifacts": entries(ARTIFACTS),
        "sidecars": entries(SIDECARS),
        "versions": versions(),
        "headline": headline,
    }
    body["manifest_hash"] = _sha256_text(_canonical(body))
    return body


def run_experiment(config: ExperimentConfig) -> ExperimentSummary:
    with _Partial(config):
        run_phase("generate", phase_generate, config)
        # later phases see the series and model as they read back from disk, like the subcommands
        series = run_phase("generate", load_series, config)
        result = run_phase("train", phase_train, config, series)
        model = run_phase("train", load_trained_model, config)
        svr_rep, base_rep, comparison = run_phase("evaluate", phase_evaluate, config, series, model)
        _, acf = run_phase("diagnose", phase_diagnose, config, series, model)
        svr_impact, base_impact = run_phase("gridsim", phase_gridsim, config, series, model)

        exceed, white = whiteness_summary(acf)
        c, e, g = result.best_params
        headline = {
            "best_params": {"c": c, "epsilon": e, "gamma": g},
            "svr": svr_rep.values(),
            "persistence": base_rep.values(),
            "reduction_pct": comparison.reduction_pct,
            "acf_exceedances": exceed,
            "residuals_white": white,
            "impact": {"svr": svr_impact.summary(), "persistence": base_impact.summary()},
        }
        manifest = run_phase("manifest", build_manifest, config, headline)
        path = io.write_json(Path(config.output_dir) / MANIFEST, manifest)
    return ExperimentSummary(Path(config.output_dir), path, manifest["manifest_hash"],
                             {k: artifact_path(config, k) for k in ARTIFACTS}, headline)
