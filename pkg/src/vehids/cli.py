"""Command line front end: simulate, train, run, sweep, report.

Exit codes: 0 success, 1 configuration/usage error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .attacks import AttackTargets
from .config import ConfigError, RunConfig, load_run_config
from .harness import (
    calibrate_threshold_scale,
    run_experiment,
    sweep_thresholds,
    write_metrics_json,
)
from .learner import load_model, save_model, train_offline
from .vehicle import RunLog, generate_scenario, run_log


class _UsageError(Exception):
    def __init__(self, parser: argparse.ArgumentParser, message: str):
        super().__init__(message)
        self.parser = parser


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would sys.exit(2); we want usage + 1
        raise _UsageError(self, message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="vehids",
                     description="Vehicle DoS intrusion-detection experiments")
    sub = parser.add_subparsers(dest="command", required=True,
                                parser_class=_Parser)

    def add(name, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="run configuration file")
        p.add_argument("--seed", type=int, default=None,
                       help="override the scenario seed")
        p.add_argument("--out", default="out", help="output directory")
        return p

    add("simulate", "generate a driving log (ground truth + measurements)")
    train = add("train", "fit the dynamics network offline and save its weights")
    train.add_argument("--log", default=None,
                       help="reuse an existing simulation log instead of generating one")
    add("run", "single experiment: attack, estimators, detector")
    add("sweep", "threshold sweep over the configured grid, both estimators")
    add("report", "sweep plus metrics JSON at the best thresholds")
    return parser


def _model_path(cfg: RunConfig, out: Path) -> Path:
    path = Path(cfg.model_file)
    return path if path.is_absolute() else out / path


def _load_model_for(cfg: RunConfig, out: Path):
    if "ukf_ml" not in cfg.estimators:
        return None
    path = _model_path(cfg, out)
    if not path.exists():
        raise ConfigError(f"model file not found: {path} (run the train command first)")
    return load_model(path)


def _cmd_simulate(cfg: RunConfig, out: Path, args) -> None:
    log = run_log(cfg.vehicle, cfg.scenario, cfg.initial_state)
    path = out / "sim_log.csv"
    log.write_csv(path)
    print(f"wrote {len(log)} steps to {path}")


def _cmd_train(cfg: RunConfig, out: Path, args) -> None:
    if args.log:
        log = RunLog.read_csv(args.log)
    else:
        scenario = generate_scenario(cfg.train_seed, cfg.train_duration_s,
                                     cfg.train_style, cfg.scenario.noise_std)
        log = run_log(cfg.vehicle, scenario, cfg.initial_state)
    result = train_offline(log, cfg.train)
    model_path = _model_path(cfg, out)
    save_model(result.model, model_path, seed=cfg.train.seed)
    curve_path = out / "loss_curves.csv"
    with open(curve_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "train_mse", "val_mse"])
        for epoch, (train_mse, val_mse) in enumerate(zip(result.train_mse, result.val_mse)):
            writer.writerow([epoch, repr(float(train_mse)), repr(float(val_mse))])
    print(f"trained on {result.n_train} samples ({result.n_outliers_dropped} outliers dropped), "
          f"validation RMSE {np.sqrt(result.val_mse[-1]):.4f} m/s^2")
    print(f"wrote {model_path} and {curve_path}")


def _cmd_run(cfg: RunConfig, out: Path, args) -> None:
    model = _load_model_for(cfg, out)
    result = run_experiment(cfg, model, out_dir=out)
    summary = {"schema": 1, "steps": 0, "estimators": {}}
    for name, run in result.runs.items():
        summary["steps"] = len(run)
        summary["estimators"][name] = {
            "alarm_steps": int(np.sum(run.alarm)),
            "attack_steps": int(np.sum(run.attack_active)),
        }
        print(f"{name}: {int(np.sum(run.alarm))} alarmed steps "
              f"of {len(run)} ({int(np.sum(run.attack_active))} under attack)")
    with open(out / "summary.json", "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _sweep(cfg: RunConfig, out: Path):
    model = _load_model_for(cfg, out)
    result = run_experiment(cfg, model, out_dir=out)
    scale = cfg.sweep_scale
    if scale == "auto":
        quiet_cfg = replace(cfg, targets=AttackTargets())
        quiet = run_experiment(quiet_cfg, model)
        reference = "ukf_ml" if "ukf_ml" in quiet.runs else "kf"
        scale = calibrate_threshold_scale(quiet.runs[reference])
    t1_grid = [float(t1) * float(scale) for t1 in cfg.sweep_t1]
    sweep = sweep_thresholds(result, t1_grid)
    sweep.write_csv(out / "sweep.csv")
    for name, metrics in sorted(sweep.best.items()):
        print(f"{name}: best F1 {metrics.f1:.4f} at t1 {metrics.threshold:.4f} "
              f"(tp {metrics.tp_rate:.3f}, fp {metrics.fp_rate:.3f})")
    return sweep


def _cmd_sweep(cfg: RunConfig, out: Path, args) -> None:
    _sweep(cfg, out)


def _cmd_report(cfg: RunConfig, out: Path, args) -> None:
    sweep = _sweep(cfg, out)
    write_metrics_json(out / "metrics.json", sweep)
    print(f"wrote {out / 'metrics.json'}")


_COMMANDS = {
    "simulate": _cmd_simulate,
    "train": _cmd_train,
    "run": _cmd_run,
    "sweep": _cmd_sweep,
    "report": _cmd_report,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        exc.parser.print_usage(sys.stderr)
        print(f"error: {exc}", file=sys.stderr)
        return 1

    try:
        cfg = load_run_config(args.config, seed_override=args.seed)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        _COMMANDS[args.command](cfg, out, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"runtime error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
