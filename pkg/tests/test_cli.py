"""Experiment pipeline and the ``loadcast`` command line."""

from __future__ import annotations

import json
import subprocess
import sys

import numpy as np
import pytest

from loadcast import cli, experiment
from loadcast.experiment import (ARTIFACTS, MANIFEST, PARTIAL_MARKER, SIDECARS, ConfigError, ExperimentConfig,
                                 MissingArtifactError, PhaseError, phase_seed, run_experiment, run_subcommand)
from loadcast.io import read_series_csv, write_series_csv
from loadcast.loadgen import PRNG_NAME

QUICK = {
    "generator": {"start": "2023-10-01T00:00:00Z", "end": "2023-11-20T00:00:00Z"},
    "grid": {"c_values": [10.0], "epsilon_values": [0.5], "gamma_values": [0.05]},
    "cv_splits": 2,
    "diagnostics": {"max_lag": 24},
}


def quick_config(tmp_path, name="out", **extra):
    d = json.loads(json.dumps(QUICK))
    d.update(extra)
    d["output_dir"] = str(tmp_path / name)
    return ExperimentConfig.from_dict(d)


@pytest.fixture
def config_file(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(QUICK))
    return path


@pytest.fixture(scope="module")
def full_run(tmp_path_factory):
    root = tmp_path_factory.mktemp("run")
    d = json.loads(json.dumps(QUICK))
    d["output_dir"] = str(root / "a")
    cfg = ExperimentConfig.from_dict(d)
    return cfg, run_experiment(cfg)


class TestConfig:
    def test_defaults(self):
        cfg = ExperimentConfig()
        assert cfg.test_fraction == 0.2 and cfg.persistence_lag_hours == 24 and cfg.max_lag == 50
        assert len(cfg.grid) == 27 and cfg.cv_splits == 5

    def test_dict_round_trip(self):
        cfg = ExperimentConfig.from_dict({"test_fraction": 0.3, "global_seed": 9})
        assert ExperimentConfig.from_dict(cfg.to_dict()) == cfg

    def test_unknown_key(self):
        with pytest.raises(ConfigError, match="unknown"):
            ExperimentConfig.from_dict({"grid": {"c": [1]}})

    def test_generator_seed_rejected(self):
        with pytest.raises(ConfigError, match="global_seed"):
            ExperimentConfig.from_dict({"generator": {"seed": 3}})

    @pytest.mark.parametrize("d", [{"test_fraction": 1.5}, {"generator": {"base_mw": -1}},
                                   {"grid": {"c_values": []}}, {"metrics": {"under_penalty": 0.1}},
                                   {"gridimpact": {"n_loads": 0}}, {"diagnostics": {"max_lag": -1}}])
    def test_invalid_values(self, d):
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict(d)

    def test_hash_ignores_output_dir(self):
        a = ExperimentConfig.from_dict({"output_dir": "x"})
        b = ExperimentConfig.from_dict({"output_dir": "y"})
        assert a.hash() == b.hash()
        assert a.hash() != ExperimentConfig.from_dict({"global_seed": 43}).hash()

    def test_seed_derivation(self):
        assert phase_seed(42, "generate") == phase_seed(42, "generate")
        assert phase_seed(42, "generate") != phase_seed(43, "generate")
        assert phase_seed(42, "generate") != phase_seed(42, "train")
        assert ExperimentConfig(global_seed=5).generator_config().seed == phase_seed(5, "generate")


class TestRunExperiment:
    def test_artifacts(self, full_run):
        cfg, summary = full_run
        manifest = json.loads(summary.manifest_path.read_text())
        assert len(manifest["artifacts"]) == 9
        assert {a["file"] for a in manifest["artifacts"]} == set(ARTIFACTS.values())
        for entry in manifest["artifacts"] + manifest["sidecars"]:
            assert (summary.output_dir / entry["file"]).is_file()
        assert not (summary.output_dir / PARTIAL_MARKER).exists()
        assert manifest["config_hash"] == cfg.hash()
        assert set(manifest["versions"]) >= {"python", "numpy", "scipy", "numba", "loadcast"}

    def test_file_formats(self, full_run):
        _, summary = full_run
        out = summary.output_dir
        lines = (out / ARTIFACTS["series"]).read_text().splitlines()
        assert lines[0] == "timestamp,load_mw"
        assert lines[1].startswith("2023-10-01T00:00:00Z,") and len(lines[1].split(",")[1].split(".")[1]) == 6
        assert (out / ARTIFACTS["grid"]).read_text().splitlines()[0] == "c,epsilon,gamma,fold,val_mse"
        comp = (out / ARTIFACTS["comparison"]).read_text().splitlines()
        assert comp[0] == "metric,svr,persistence,reduction_pct" and len(comp) == 7
        heat = (out / ARTIFACTS["heatmap"]).read_text().splitlines()
        assert heat[0] == "day_of_week,hour,mean_residual,count" and len(heat) == 169
        acf = (out / ARTIFACTS["acf"]).read_text().splitlines()
        assert acf[0] == "lag,acf,conf_halfwidth" and len(acf) == 26
        impact = (out / ARTIFACTS["impact"]).read_text().splitlines()
        assert impact[0] == ("timestamp,min_v_actual,min_v_forecast,max_loading_actual,"
                             "max_loading_forecast,violation_actual,violation_forecast")
        meta = json.loads((out / SIDECARS["series_meta"]).read_text())
        assert meta["prng"] == PRNG_NAME and "seed" in meta["generator"]
        metrics = json.loads((out / ARTIFACTS["metrics_svr"]).read_text())
        assert {"mse", "mae", "rmse", "asymmetric", "time_weighted", "composite", "n", "config", "model"} <= set(metrics)
        summary_json = json.loads((out / SIDECARS["grid_summary"]).read_text())
        assert summary_json["best_params"]["c"] == 10.0 and "refit" in summary_json
        impact_summary = json.loads((out / SIDECARS["impact_summary"]).read_text())
        assert {"missed", "false_alarms"} <= set(impact_summary["svr"])

    def test_series_csv_round_trip(self, full_run, tmp_path):
        _, summary = full_run
        s = read_series_csv(summary.output_dir / ARTIFACTS["series"])
        again = write_series_csv(s, tmp_path / "s.csv")
        assert again.read_bytes() == (summary.output_dir / ARTIFACTS["series"]).read_bytes()

    def test_repeat_run_is_identical(self, full_run, tmp_path):
        cfg, first = full_run
        second = run_experiment(quick_config(tmp_path, "b"))
        assert second.manifest_hash == first.manifest_hash
        for name in list(ARTIFACTS.values()) + list(SIDECARS.values()) + [MANIFEST]:
            assert (second.output_dir / name).read_bytes() == (first.output_dir / name).read_bytes(), name

    def test_chained_phases_match(self, full_run, tmp_path):
        _, first = full_run
        cfg = quick_config(tmp_path, "chain")
        for phase in ("generate", "train", "evaluate", "diagnose", "gridsim"):
            run_subcommand(cfg, phase)
        for name in list(ARTIFACTS.values()) + list(SIDECARS.values()):
            assert (tmp_path / "chain" / name).read_bytes() == (first.output_dir / name).read_bytes(), name

    def test_phase_failure_leaves_marker(self, tmp_path, monkeypatch):
        def boom(*args):
            raise RuntimeError("solver exploded")

        monkeypatch.setattr(experiment, "phase_train", boom)
        cfg = quick_config(tmp_path)
        with pytest.raises(PhaseError) as err:
            run_experiment(cfg)
        assert err.value.phase == "train"
        assert "[train]" in str(err.value)
        marker = tmp_path / "out" / PARTIAL_MARKER
        assert marker.exists() and "solver exploded" in marker.read_text()
        assert (tmp_path / "out" / ARTIFACTS["series"]).exists()

    def test_missing_artifact_names_producer(self, tmp_path):
        cfg = quick_config(tmp_path)
        with pytest.raises(PhaseError) as err:
            run_subcommand(cfg, "evaluate")
        cause = err.value.cause
        assert isinstance(cause, MissingArtifactError)
        assert cause.producer == "generate" and cause.path.name == ARTIFACTS["series"]


class TestCommandLine:
    def test_generate_is_deterministic(self, tmp_path, config_file, capsys):
        for name in ("a", "b"):
            code = cli.main(["generate", "--config", str(config_file), "--seed", "7",
                             "--output-dir", str(tmp_path / name)])
            assert code == 0
        a = (tmp_path / "a" / ARTIFACTS["series"]).read_bytes()
        assert a == (tmp_path / "b" / ARTIFACTS["series"]).read_bytes()
        cli.main(["generate", "--config", str(config_file), "--seed", "8", "--output-dir", str(tmp_path / "c")])
        assert a != (tmp_path / "c" / ARTIFACTS["series"]).read_bytes()
        assert "generated" in capsys.readouterr().out

    def test_missing_artifact_exit_code(self, tmp_path, config_file, capsys):
        code = cli.main(["train", "--config", str(config_file), "--output-dir", str(tmp_path / "o")])
        assert code == 2
        err = capsys.readouterr().err
        assert ARTIFACTS["series"] in err and "loadcast generate" in err

    def test_model_missing_names_train(self, tmp_path, config_file, capsys):
        args = ["--config", str(config_file), "--output-dir", str(tmp_path / "o")]
        assert cli.main(["generate", *args]) == 0
        assert cli.main(["diagnose", *args]) == 2
        err = capsys.readouterr().err
        assert ARTIFACTS["model"] in err and "loadcast train" in err

    def test_degenerate_diagnose(self, tmp_path, config_file, capsys):
        args = ["--config", str(config_file), "--output-dir", str(tmp_path / "o")]
        for phase in ("generate", "train"):
            assert cli.main([phase, *args]) == 0
        assert cli.main(["diagnose", *args, "--max-lag", "100000"]) == 2
        assert "DegenerateInputError" in capsys.readouterr().err

    def test_bad_config_exit_code(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        assert cli.main(["run", "--config", str(bad)]) == 2
        assert cli.main(["run", "--config", str(tmp_path / "nope.json")]) == 2
        assert cli.main(["run", "--set", "grid.c_values=[-1]"]) == 2
        assert cli.main(["run", "--set", "nonsense"]) == 2
        assert cli.main(["run", "--test-fraction", "2"]) == 2

    def test_internal_failure_exit_code(self, tmp_path, config_file, monkeypatch, capsys):
        def boom(*args):
            raise RuntimeError("disk on fire")

        monkeypatch.setattr(experiment, "phase_generate", boom)
        code = cli.main(["generate", "--config", str(config_file), "--output-dir", str(tmp_path / "o")])
        assert code == 1
        assert "[generate]" in capsys.readouterr().err

    def test_overrides_win(self, tmp_path, config_file):
        parser = cli.build_parser()
        args = parser.parse_args(["run", "--config", str(config_file), "--seed", "11", "--persistence-lag", "168",
                                  "--test-fraction", "0.25", "--max-lag", "30", "--output-dir", "z",
                                  "--set", "grid.c_values=[1, 2]", "--set", "metrics.peak_weight=3"])
        cfg = cli.load_config(args)
        assert cfg.global_seed == 11 and cfg.persistence_lag_hours == 168
        assert cfg.test_fraction == 0.25 and cfg.max_lag == 30 and cfg.output_dir == "z"
        assert cfg.grid.c_values == (1, 2) and cfg.metric_config.peak_weight == 3
        assert cfg.grid.epsilon_values == (0.5,)

    def test_run_matches_library(self, tmp_path, config_file, full_run, capsys):
        _, first = full_run
        code = cli.main(["run", "--config", str(config_file), "--output-dir", str(tmp_path / "o")])
        assert code == 0
        out = capsys.readouterr().out
        assert "composite" in out and "manifest" in out
        for name in ARTIFACTS.values():
            assert (tmp_path / "o" / name).read_bytes() == (first.output_dir / name).read_bytes()

    def test_console_script(self, tmp_path, config_file):
        proc = subprocess.run([sys.executable, "-m", "loadcast.cli", "generate", "--config", str(config_file),
                               "--output-dir", str(tmp_path / "o")], capture_output=True, text=True)
        assert proc.returncode == 0, proc.stderr
        s = read_series_csv(tmp_path / "o" / ARTIFACTS["series"])
        assert len(s) == 50 * 24
        assert np.all(s.values > 0)
