"""Command-line entry point.

Subcommands: simulate, preprocess (at-summary | energy-resample),
train, monitor, evaluate, reproduce.

Configuration precedence, highest first:
  1. CLI flags (--seed, --z, --out, --scale, --jobs)
  2. fields in the JSON config file given with --config
  3. built-in defaults

Every command writes a run manifest next to its outputs; rerunning a
command with the recorded config reproduces the data outputs byte for
byte.  Exit codes: 0 success, 2 config error, 3 data error, 4 numeric
error, 5 partial grid failure.  DRIFTGUARD_LOG sets the log level.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .bench import (DEFAULT_FAP_TARGET, DEFAULT_N_CALIBRATION, DetectorSpec,
                    run_experiment)
from .chart import ChartConfig, monitor, write_alarms_csv
from .dataset import (
    TimeSeries,
    at_summary,
    load_csv,
    load_spectra_csv,
    resample_energy,
    split_train_test,
    write_csv,
)
from .ensemble import fit_bundle, load_bundle, save_bundle
from .errors import ConfigError, InputError, NumericError
from .manifest import RunManifest, write_manifest
from .metrics import RunOutcome, aggregate, write_report_csv
from .nn import TrainConfig
from .simgen import DELTA_GRID, PHI_GRID, SimConfig, experiment_grid, generate

log = logging.getLogger("driftguard.cli")

DETECTOR_ORDER = ("proposed", "ablated_a", "ablated_b", "rnn_residual")


# ----------------------------------------------------------------------
# Config plumbing
# ----------------------------------------------------------------------

def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {p}")
    try:
        doc = json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{p}: invalid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"{p}: config must be a JSON object")
    return doc


def _reject_unknown(doc: dict, allowed: set[str], where: str) -> None:
    unknown = sorted(set(doc) - allowed)
    if unknown:
        raise ConfigError(f"{where}: unknown fields {unknown}")


def _train_config(doc: dict) -> TrainConfig:
    fields = {f.name for f in dataclasses.fields(TrainConfig)}
    _reject_unknown(doc, fields, "train")
    return TrainConfig(**doc)


def _require(config: dict, key: str, where: str):
    if key not in config:
        raise ConfigError(f"{where}: missing required field {key!r}")
    return config[key]


def _out_dir(config: dict) -> Path:
    out = Path(config.get("out", "."))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _finish(manifest: RunManifest, started: float, out_dir: Path,
            name: str = "manifest.json") -> None:
    manifest.elapsed_seconds = round(time.time() - started, 3)
    write_manifest(manifest, out_dir / name)


# ----------------------------------------------------------------------
# Commands
# ----------------------------------------------------------------------

_SIM_FIELDS = {"phi", "delta", "seed", "phis", "deltas", "seeds", "schedule",
               "count", "length", "tau", "alpha0", "alpha1", "beta",
               "burn_in", "out"}


def _sim_grid(config: dict) -> list[SimConfig]:
    """Either one scalar config or a phi x delta x seed grid; all
    SimConfigs are validated here, before any simulation starts."""
    _reject_unknown(config, _SIM_FIELDS, "simulate")
    sim_kwargs = {k: config[k] for k in
                  ("length", "tau", "alpha0", "alpha1", "beta", "burn_in")
                  if k in config}
    scalar = {"phi", "delta", "seed"} & set(config)
    listy = {"phis", "deltas", "seeds", "schedule", "count"} & set(config)
    if scalar and listy:
        raise ConfigError("simulate: mix of scalar (phi/delta/seed) and "
                          "grid (phis/deltas/seeds) fields")
    if scalar:
        return [SimConfig(phi=_require(config, "phi", "simulate"),
                          delta=config.get("delta", 0.0),
                          seed=config.get("seed", 0), **sim_kwargs)]
    return experiment_grid(
        config.get("phis", list(PHI_GRID)),
        config.get("deltas", list(DELTA_GRID)),
        seeds=config.get("seeds"),
        schedule=config.get("schedule", "main"),
        count=config.get("count"),
        **sim_kwargs)


def cmd_simulate(config: dict) -> int:
    started = time.time()
    grid = _sim_grid(config)
    out = _out_dir(config)
    manifest = RunManifest("simulate", config,
                           seeds=sorted({c.seed for c in grid}))
    for cfg in grid:
        series = generate(cfg)
        path = out / f"{series.label}.csv"
        write_csv(series, path)
        manifest.add_output(path)
    log.info("simulate: wrote %d series to %s", len(grid), out)
    _finish(manifest, started, out)
    return 0


def cmd_preprocess(mode: str, config: dict) -> int:
    started = time.time()
    allowed = {"input", "out", "service_start", "service_end",
               "bucket_minutes", "day_start", "apply_filter"}
    _reject_unknown(config, allowed, f"preprocess {mode}")
    input_path = Path(_require(config, "input", f"preprocess {mode}"))
    out_path = Path(_require(config, "out", f"preprocess {mode}"))
    out_path.parent.mkdir(parents=True, exist_ok=True)
    manifest = RunManifest(f"preprocess {mode}", config)
    manifest.add_input(input_path)

    if mode == "at-summary":
        stamps, rows = load_spectra_csv(input_path)
        values = np.array([at_summary(row) for row in rows])
        series = TimeSeries(values, None if stamps is None else np.array(stamps))
    else:
        kwargs = {k: config[k] for k in
                  ("service_start", "service_end", "bucket_minutes",
                   "day_start", "apply_filter") if k in config}
        series = resample_energy(load_csv(input_path), **kwargs)
    write_csv(series, out_path)
    manifest.add_output(out_path)
    log.info("preprocess %s: %s -> %s (%d rows)", mode, input_path, out_path,
             len(series))
    _finish(manifest, started, out_path.parent,
            out_path.name + ".manifest.json")
    return 0


_TRAIN_FIELDS = {"data", "out", "window", "b", "n", "seed", "variant",
                 "use_bias", "train"}


def cmd_train(config: dict) -> int:
    started = time.time()
    _reject_unknown(config, _TRAIN_FIELDS, "train")
    data_path = Path(_require(config, "data", "train"))
    out_path = Path(_require(config, "out", "train"))
    out_path.parent.mkdir(parents=True, exist_ok=True)
    series = load_csv(data_path)
    bundle = fit_bundle(
        series,
        window=config.get("window", 5),
        b=config.get("b", 5),
        cfg=_train_config(config.get("train", {})),
        master_seed=config.get("seed", 0),
        n=config.get("n"),
        variant=config.get("variant", "standard"),
        use_bias=config.get("use_bias", True),
    )
    save_bundle(bundle, out_path)
    manifest = RunManifest("train", config, seeds=[config.get("seed", 0)])
    manifest.add_input(data_path)
    manifest.add_output(out_path)
    log.info("train: fitted b=%d ensemble from %s -> %s",
             bundle.ensemble.b, data_path, out_path)
    _finish(manifest, started, out_path.parent,
            out_path.name + ".manifest.json")
    return 0


def cmd_monitor(config: dict) -> int:
    started = time.time()
    _reject_unknown(config, {"bundle", "data", "z", "window", "out"}, "monitor")
    bundle_path = Path(_require(config, "bundle", "monitor"))
    data_path = Path(_require(config, "data", "monitor"))
    out_path = Path(_require(config, "out", "monitor"))
    out_path.parent.mkdir(parents=True, exist_ok=True)
    bundle = load_bundle(bundle_path)
    series = load_csv(data_path)
    records = monitor(bundle, series,
                      ChartConfig(z=config.get("z", 2.326),
                                  window=config.get("window")))
    write_alarms_csv(records, out_path)
    manifest = RunManifest("monitor", config)
    manifest.add_input(bundle_path)
    manifest.add_input(data_path)
    manifest.add_output(out_path)
    alarms = sum(not r.in_control for r in records)
    log.info("monitor: %d points, %d alarms -> %s", len(records), alarms,
             out_path)
    _finish(manifest, started, out_path.parent,
            out_path.name + ".manifest.json")
    return 0


def _outcome_from_alarm_csv(entry: dict, where: str) -> RunOutcome:
    from .chart import load_alarms_csv
    _reject_unknown(entry, {"model", "phi", "delta", "tau", "length",
                            "alarms", "offset"}, where)
    records = load_alarms_csv(Path(_require(entry, "alarms", where)))
    offset = entry.get("offset", 0)
    alarms = tuple(r.index + offset for r in records if not r.in_control)
    return RunOutcome(_require(entry, "tau", where),
                      _require(entry, "length", where), alarms)


def cmd_evaluate(config: dict) -> int:
    started = time.time()
    _reject_unknown(config, {"runs", "out"}, "evaluate")
    runs = _require(config, "runs", "evaluate")
    if not isinstance(runs, list) or not runs:
        raise ConfigError("evaluate: runs must be a non-empty list")
    out_path = Path(_require(config, "out", "evaluate"))
    out_path.parent.mkdir(parents=True, exist_ok=True)
    manifest = RunManifest("evaluate", config)
    labeled = []
    for i, entry in enumerate(runs):
        where = f"evaluate: runs[{i}]"
        outcome = _outcome_from_alarm_csv(entry, where)
        manifest.add_input(entry["alarms"])
        labeled.append((entry.get("model", "proposed"),
                        entry.get("phi", 0.0), entry.get("delta", 0.0),
                        outcome))
    reports = aggregate(labeled, model_order=list(DETECTOR_ORDER))
    write_report_csv(reports, out_path)
    manifest.add_output(out_path)
    log.info("evaluate: %d runs -> %s", len(runs), out_path)
    _finish(manifest, started, out_path.parent,
            out_path.name + ".manifest.json")
    return 0


_TABLES = {
    "table2": {"deltas": [0.0], "schedule": "main"},
    "table4": {"deltas": list(DELTA_GRID), "schedule": "main"},
    "appendix": {"deltas": list(DELTA_GRID), "schedule": "appendix"},
}

_REPRODUCE_FIELDS = {"phis", "deltas", "scale", "jobs", "out", "n_train",
                     "n_calibration", "fap_target", "window", "b", "n", "z",
                     "variant", "use_bias", "train", "detectors", "length",
                     "tau", "alpha0", "alpha1", "beta", "burn_in"}


def _reproduce_detectors(config: dict) -> list[DetectorSpec]:
    kinds = config.get("detectors", list(DETECTOR_ORDER))
    unknown = sorted(set(kinds) - set(DETECTOR_ORDER))
    if unknown:
        raise ConfigError(f"reproduce: unknown detectors {unknown}")
    train_cfg = _train_config(config.get("train", {"max_epochs": 100}))
    specs = []
    for kind in DETECTOR_ORDER:
        if kind not in kinds:
            continue
        ensemble_kind = kind in ("proposed", "ablated_a")
        specs.append(DetectorSpec(
            kind,
            train=train_cfg,
            window=config.get("window", 5),
            b=config.get("b", 5) if ensemble_kind else None,
            n=config.get("n") if ensemble_kind else None,
            z=config.get("z"),
            variant=config.get("variant", "standard"),
            use_bias=config.get("use_bias", True),
        ))
    return specs


def cmd_reproduce(table: str, config: dict) -> int:
    started = time.time()
    if table not in _TABLES:
        raise ConfigError(f"reproduce: unknown table {table!r}")
    _reject_unknown(config, _REPRODUCE_FIELDS, "reproduce")
    scale = config.get("scale", 100)
    if not isinstance(scale, int) or scale < 1:
        raise ConfigError("reproduce: scale must be a positive integer")
    sim_kwargs = {k: config[k] for k in
                  ("length", "tau", "alpha0", "alpha1", "beta", "burn_in")
                  if k in config}
    grid = experiment_grid(
        config.get("phis", list(PHI_GRID)),
        config.get("deltas", _TABLES[table]["deltas"]),
        schedule=_TABLES[table]["schedule"],
        count=scale,
        **sim_kwargs)
    detectors = _reproduce_detectors(config)
    out = _out_dir(config)
    result = run_experiment(
        grid, detectors,
        n_train=config.get("n_train", 350),
        n_calibration=config.get("n_calibration", DEFAULT_N_CALIBRATION),
        fap_target=config.get("fap_target", DEFAULT_FAP_TARGET),
        jobs=config.get("jobs", os.cpu_count() or 1),
    )
    report_path = out / f"report-{table}.csv"
    write_report_csv(result.reports, report_path)
    manifest = RunManifest(f"reproduce {table}", config,
                           seeds=sorted({c.seed for c in grid}))
    manifest.config = dict(config)
    manifest.config["experiment"] = result.manifest
    manifest.add_output(report_path)
    _finish(manifest, started, out, f"report-{table}.manifest.json")
    failures = result.manifest["failures"]
    if failures:
        log.warning("reproduce %s: %d runs failed; see manifest", table,
                    len(failures))
        return 5
    log.info("reproduce %s: %d rows -> %s", table, len(result.reports),
             report_path)
    return 0


# ----------------------------------------------------------------------
# Argument parsing and dispatch
# ----------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="driftguard",
        description="Prediction-interval monitoring for series with "
                    "time-varying variability.")
    parser.add_argument("--version", action="version",
                        version=f"driftguard {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--out", help="output directory or file")

    p = sub.add_parser("simulate", help="generate benchmark series")
    common(p)
    p.add_argument("--seed", type=int, help="single seed override")

    p = sub.add_parser("preprocess", help="dataset preparation")
    p.add_argument("mode", choices=["at-summary", "energy-resample"])
    common(p)

    p = sub.add_parser("train", help="fit an uncertainty bundle")
    common(p)
    p.add_argument("--seed", type=int, help="master seed override")

    p = sub.add_parser("monitor", help="run a chart over a series")
    common(p)
    p.add_argument("--z", type=float, help="interval half-width multiplier")

    p = sub.add_parser("evaluate", help="aggregate alarm files into metrics")
    common(p)

    p = sub.add_parser("reproduce", help="run a benchmark table")
    p.add_argument("table", choices=sorted(_TABLES))
    common(p)
    p.add_argument("--scale", type=int, help="number of seeds per cell")
    p.add_argument("--jobs", type=int,
                   help="parallel workers (default: available cores)")
    return parser


def _effective_config(args: argparse.Namespace) -> dict:
    """Config-file fields overridden by whichever flags were given."""
    config = _load_config(args.config)
    for flag in ("seed", "out", "z", "scale", "jobs"):
        value = getattr(args, flag, None)
        if value is not None:
            config[flag] = value
    if getattr(args, "seed", None) is not None and args.command == "simulate":
        # a single-seed override turns a grid config into a one-seed grid
        grid_fields = {"phis", "deltas", "seeds", "schedule", "count"}
        if grid_fields & set(config):
            config["seeds"] = [args.seed]
            config.pop("seed", None)
            config.pop("schedule", None)
            config.pop("count", None)
    return config


def main(argv: list[str] | None = None) -> int:
    level = os.environ.get("DRIFTGUARD_LOG", "WARNING").upper()
    logging.basicConfig(
        level=level if level in ("DEBUG", "INFO", "WARNING", "ERROR",
                                 "CRITICAL") else "WARNING",
        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        config = _effective_config(args)
        if args.command == "simulate":
            return cmd_simulate(config)
        if args.command == "preprocess":
            return cmd_preprocess(args.mode, config)
        if args.command == "train":
            return cmd_train(config)
        if args.command == "monitor":
            return cmd_monitor(config)
        if args.command == "evaluate":
            return cmd_evaluate(config)
        return cmd_reproduce(args.table, config)
    except ConfigError as exc:
        log.error("config error: %s", exc)
        print(f"driftguard: config error: {exc}", file=sys.stderr)
        return 2
    except InputError as exc:
        log.error("data error: %s", exc)
        print(f"driftguard: data error: {exc}", file=sys.stderr)
        return 3
    except NumericError as exc:
        log.error("numeric error: %s", exc)
        print(f"driftguard: numeric error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
