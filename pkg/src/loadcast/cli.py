"""Command line entry point: ``loadcast <subcommand> --config cfg.json [overrides]``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .experiment import (INPUT_ERRORS, ConfigError, ExperimentConfig, PhaseError, run_experiment,
                         run_subcommand)
from .metrics import METRIC_NAMES

SUBCOMMANDS = ("run", "generate", "train", "evaluate", "diagnose", "gridsim")
EXIT_OK, EXIT_FAILURE, EXIT_INPUT = 0, 1, 2

# flag -> dotted config path
FLAG_PATHS = {
    "output_dir": "output_dir",
    "seed": "global_seed",
    "persistence_lag": "persistence_lag_hours",
    "test_fraction": "test_fraction",
    "max_lag": "diagnostics.max_lag",
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON experiment configuration")
    common.add_argument("--output-dir")
    common.add_argument("--seed", type=int)
    common.add_argument("--persistence-lag", type=int)
    common.add_argument("--test-fraction", type=float)
    common.add_argument("--max-lag", type=int)
    common.add_argument("--set", dest="overrides", action="append", default=[], metavar="PATH=VALUE",
                        help="override any config entry, e.g. grid.c_values=[1,10]")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="loadcast", description="Load forecasting experiment runner.")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "run": "all phases plus the manifest",
        "generate": "write the synthetic load series",
        "train": "grid search and refit the SVR",
        "evaluate": "metrics for SVR and persistence",
        "diagnose": "residual heatmap and autocorrelation",
        "gridsim": "feeder power flows for actual and forecast load",
    }
    for name in SUBCOMMANDS:
        sub.add_parser(name, parents=[common], help=helps[name])
    return parser


def _set_path(d: dict, dotted: str, value) -> None:
    keys = dotted.split(".")
    for k in keys[:-1]:
        d = d.setdefault(k, {})
        if not isinstance(d, dict):
            raise ConfigError(f"cannot set {dotted!r}: {k!r} is not an object")
    d[keys[-1]] = value


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def load_config(args: argparse.Namespace) -> ExperimentConfig:
    raw: dict = {}
    if args.config is not None:
        try:
            raw = json.loads(args.config.read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {args.config} is not valid JSON: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError("config must be a JSON object")
    for item in args.overrides:
        path, sep, value = item.partition("=")
        if not sep or not path:
            raise ConfigError(f"override {item!r} is not of the form PATH=VALUE")
        _set_path(raw, path.strip(), _parse_value(value))
    for attr, path in FLAG_PATHS.items():
        value = getattr(args, attr)
        if value is not None:
            _set_path(raw, path, value)
    return ExperimentConfig.from_dict(raw)


def _report(command: str, result, out) -> None:
    if command == "run":
        h = result.headline
        print(f"{'metric':<14}{'svr':>12}{'persistence':>14}{'reduction %':>14}", file=out)
        for m in METRIC_NAMES:
            print(f"{m:<14}{h['svr'][m]:>12.4f}{h['persistence'][m]:>14.4f}{h['reduction_pct'][m]:>14.2f}",
                  file=out)
        print(f"acf exceedances: {h['acf_exceedances']}", file=out)
        print(f"manifest: {result.manifest_path} ({result.manifest_hash[:12]})", file=out)
    elif command == "generate":
        print(f"generated {len(result)} hourly points", file=out)
    elif command == "train":
        c, e, g = result.best_params
        print(f"best C={c} epsilon={e} gamma={g} (mean val MSE {result.mean_mse[result.best_params]:.4f})",
              file=out)
    elif command == "evaluate":
        svr, base, _ = result
        print(f"svr MAE {svr.mae:.4f}, persistence MAE {base.mae:.4f}", file=out)
    elif command == "diagnose":
        print(f"acf over {result[1].max_lag} lags written", file=out)
    elif command == "gridsim":
        s = result[0].summary()
        print(f"missed {s['missed']}, false alarms {s['false_alarms']}", file=out)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        config = load_config(args)
        if args.command == "run":
            result = run_experiment(config)
        else:
            result = run_subcommand(config, args.command)
    except ConfigError as exc:
        print(f"loadcast: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except PhaseError as exc:
        print(f"loadcast: {exc}", file=sys.stderr)
        return EXIT_INPUT if isinstance(exc.cause, INPUT_ERRORS) else EXIT_FAILURE
    _report(args.command, result, sys.stdout)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
