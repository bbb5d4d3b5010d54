"""End-to-end experiment runner, per-step scoring and threshold sweeps.

One experiment simulates the plant under the configured DoS schedule, feeds
both estimators the same command and (possibly masked) measurement stream,
pushes each residual into its own detector, and adapts the learned model online
with the residual-gated rate. Sweeps re-score the logged window statistics at
many thresholds without re-simulating.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .attacks import attack_actuator, attack_sensor, is_active
from .config import RunConfig
from .detector import DetectorState, push_residual
from .estimators import (
    GaussianBelief,
    KalmanFilterBaseline,
    KfModel,
    UnscentedKalmanFilter,
)
from .learner import MlpModel, MlpProcessModel, OnlineAdapter, TrainingSample
from .vehicle import ControlCommand, measure, step, unify_control

__all__ = [
    "ConfusionMetrics", "EstimatorRun", "ExperimentResult", "StepLabel",
    "SweepResult", "calibrate_threshold_scale", "run_experiment", "rescore",
    "score", "sweep_thresholds", "unify_control", "write_metrics_json",
]

RUN_CSV_HEADER = (
    "time_s,throttle,brake,steer,u,speed,yaw_rate,accel,"
    "meas_accel,meas_speed,meas_yaw,attack_active,"
    "r_accel,r_speed,r_yaw,s1,s2,alarm"
)

METRICS_SCHEMA_VERSION = 1


@dataclass(frozen=True)
class StepLabel:
    t: float
    truth: bool
    predicted: bool


@dataclass(frozen=True)
class ConfusionMetrics:
    """Rates normalized within the actual-positive / actual-negative steps."""

    tp_rate: float
    fp_rate: float
    tn_rate: float
    fn_rate: float
    f1: float
    threshold: float


@dataclass
class EstimatorRun:
    """Per-step record of one estimator's pass over the experiment."""

    name: str
    time_s: np.ndarray
    throttle: np.ndarray
    brake: np.ndarray
    steer: np.ndarray
    u: np.ndarray
    speed: np.ndarray
    yaw_rate: np.ndarray
    accel: np.ndarray
    meas: np.ndarray            # (n, 3), as delivered to the filter
    attack_active: np.ndarray   # bool, ground-truth blocking at each step
    residuals: np.ndarray       # (n, 3)
    s1: np.ndarray
    s2: np.ndarray
    alarm: np.ndarray           # bool, at the configured threshold
    window_full: np.ndarray     # bool, detector warm-up indicator

    def __len__(self) -> int:
        return len(self.time_s)

    def labels(self) -> list[StepLabel]:
        return [
            StepLabel(t=float(t), truth=bool(a), predicted=bool(p))
            for t, a, p in zip(self.time_s, self.attack_active, self.alarm)
        ]

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(RUN_CSV_HEADER.split(","))
            for i in range(len(self)):
                row = [repr(float(v)) for v in (
                    self.time_s[i], self.throttle[i], self.brake[i], self.steer[i],
                    self.u[i], self.speed[i], self.yaw_rate[i], self.accel[i],
                    self.meas[i, 0], self.meas[i, 1], self.meas[i, 2],
                )]
                row.append(str(int(self.attack_active[i])))
                row.extend(repr(float(v)) for v in (
                    self.residuals[i, 0], self.residuals[i, 1], self.residuals[i, 2],
                    self.s1[i], self.s2[i],
                ))
                row.append(str(int(self.alarm[i])))
                writer.writerow(row)


@dataclass
class ExperimentResult:
    runs: dict
    cfg: RunConfig


def _initial_belief(cfg: RunConfig) -> GaussianBelief:
    mean = np.array([cfg.initial_state.speed_mps, 0.0, 0.0])
    return GaussianBelief(mean=mean, cov=np.diag([1.0, 0.01, 1.0]))


def run_experiment(cfg: RunConfig, model: Optional[MlpModel] = None,
                   out_dir=None) -> ExperimentResult:
    """Simulate the configured scenario and run every requested estimator on it.

    Both estimators consume the identical command and measurement streams, so
    differences downstream come only from their residuals. Returns one
    :class:`EstimatorRun` per estimator; also writes ``run_<name>.csv`` files
    when ``out_dir`` is given.
    """
    if "ukf_ml" in cfg.estimators and model is None:
        raise ValueError("the learned-model estimator needs a trained model")

    params = cfg.vehicle
    n_steps = int(round(cfg.scenario.duration_s / params.dt_s))
    n_rows = n_steps - 1
    if n_rows < cfg.detector.window_n:
        raise ValueError("scenario shorter than the detector window")

    filters: dict[str, object] = {}
    adapter = None
    if "kf" in cfg.estimators:
        kf_model = KfModel(
            mass_kg=params.mass_kg,
            traction_max_mps2=params.traction_max_mps2,
            dt_s=params.dt_s,
        )
        filters["kf"] = KalmanFilterBaseline(
            kf_model, cfg.q_proc, cfg.r_meas, _initial_belief(cfg))
    if "ukf_ml" in cfg.estimators:
        adapter = OnlineAdapter(model, cfg.adapt, cfg.online_lr)
        process = MlpProcessModel(adapter.model, params)
        filters["ukf_ml"] = UnscentedKalmanFilter(
            process, cfg.ut, cfg.q_proc, cfg.r_meas, _initial_belief(cfg))

    det_states = {name: DetectorState() for name in filters}
    cols = {name: np.zeros(n_rows) for name in
            ("time_s", "throttle", "brake", "steer", "u", "speed", "yaw_rate", "accel")}
    meas_rows = np.zeros((n_rows, 3))
    active_rows = np.zeros(n_rows, dtype=bool)
    residual_rows = {name: np.zeros((n_rows, 3)) for name in filters}
    s1_rows = {name: np.zeros(n_rows) for name in filters}
    s2_rows = {name: np.zeros(n_rows) for name in filters}
    alarm_rows = {name: np.zeros(n_rows, dtype=bool) for name in filters}
    full_rows = {name: np.zeros(n_rows, dtype=bool) for name in filters}

    rng = np.random.default_rng(cfg.seed)
    state = replace(cfg.initial_state, time_s=0.0)
    u_prev: Optional[np.ndarray] = None
    y_prev: Optional[np.ndarray] = None

    for k in range(n_steps):
        t = k * params.dt_s
        cmd = cfg.scenario.command_at(t)
        active = is_active(cfg.schedule, t)
        u_vec = np.array([cmd.unified, cmd.steer])
        y_vec = measure(state, cfg.scenario.noise_std, rng).as_vector()
        y_vec = attack_sensor(y_vec, cfg.targets, active)

        if k >= 1:
            row = k - 1
            cols["time_s"][row] = t
            cols["throttle"][row] = cmd.throttle
            cols["brake"][row] = cmd.brake
            cols["steer"][row] = cmd.steer
            cols["u"][row] = cmd.unified
            cols["speed"][row] = state.speed_mps
            cols["yaw_rate"][row] = state.yaw_rate_rps
            cols["accel"][row] = state.accel_mps2
            meas_rows[row] = y_vec
            active_rows[row] = active

            ukf_residual = None
            for name, flt in filters.items():
                result = flt.step(u_prev, y_vec)
                det_states[name] = push_residual(det_states[name], cfg.detector,
                                                 result.residual)
                ds = det_states[name]
                residual_rows[name][row] = result.residual
                s1_rows[name][row] = ds.s1
                s2_rows[name][row] = ds.s2
                alarm_rows[name][row] = ds.alarm
                full_rows[name][row] = ds.window_full(cfg.detector)
                if name == "ukf_ml":
                    ukf_residual = result.residual

            if adapter is not None and cfg.adapt.enabled:
                sample = TrainingSample(
                    input=np.array([u_prev[0], u_prev[1],
                                    y_prev[1], y_prev[2], y_prev[0]]),
                    target=float(y_vec[0]),
                )
                adapter.update(sample, ukf_residual)

        plant_vec = attack_actuator(
            [cmd.throttle, cmd.brake, cmd.steer], cfg.targets, active)
        state = step(params, state, ControlCommand(
            throttle=float(plant_vec[0]), brake=float(plant_vec[1]),
            steer=float(plant_vec[2])))
        u_prev, y_prev = u_vec, y_vec

    runs = {}
    for name in filters:
        runs[name] = EstimatorRun(
            name=name,
            meas=meas_rows.copy(),
            attack_active=active_rows.copy(),
            residuals=residual_rows[name],
            s1=s1_rows[name],
            s2=s2_rows[name],
            alarm=alarm_rows[name],
            window_full=full_rows[name],
            **{key: value.copy() for key, value in cols.items()},
        )

    if out_dir is not None:
        for name, run in runs.items():
            run.write_csv(f"{out_dir}/run_{name}.csv")
    return ExperimentResult(runs=runs, cfg=cfg)


def score(labels: Sequence[StepLabel], threshold: float = float("nan")) -> ConfusionMetrics:
    """Confusion rates and F1 over a per-step label stream."""
    tp = sum(1 for l in labels if l.truth and l.predicted)
    fn = sum(1 for l in labels if l.truth and not l.predicted)
    fp = sum(1 for l in labels if not l.truth and l.predicted)
    tn = sum(1 for l in labels if not l.truth and not l.predicted)
    positives = tp + fn
    negatives = fp + tn
    if positives == 0 or negatives == 0:
        raise ValueError("label stream must contain both truth classes")
    precision = tp / (tp + fp) if tp + fp > 0 else 0.0
    recall = tp / positives
    f1 = (2.0 * precision * recall / (precision + recall)
          if precision + recall > 0 else 0.0)
    return ConfusionMetrics(
        tp_rate=tp / positives,
        fn_rate=fn / positives,
        fp_rate=fp / negatives,
        tn_rate=tn / negatives,
        f1=f1,
        threshold=threshold,
    )


def rescore(run: EstimatorRun, t1: float, gamma: float) -> ConfusionMetrics:
    """Re-evaluate the alarm rule on logged statistics at a different threshold."""
    predicted = run.window_full & (np.abs(run.s1) > t1) & (run.s2 > gamma * t1)
    labels = [
        StepLabel(t=float(t), truth=bool(a), predicted=bool(p))
        for t, a, p in zip(run.time_s, run.attack_active, predicted)
    ]
    return score(labels, threshold=t1)


@dataclass
class SweepResult:
    """All (estimator, threshold) metrics plus the best-F1 row per estimator."""

    rows: list  # of (estimator_name, ConfusionMetrics)
    best: dict  # estimator_name -> ConfusionMetrics
    gamma: float

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["estimator", "t1", "t2", "tp", "fp", "tn", "fn", "f1"])
            for name, metrics in self.rows:
                writer.writerow([
                    name,
                    repr(float(metrics.threshold)),
                    repr(float(self.gamma * metrics.threshold)),
                    repr(float(metrics.tp_rate)),
                    repr(float(metrics.fp_rate)),
                    repr(float(metrics.tn_rate)),
                    repr(float(metrics.fn_rate)),
                    repr(float(metrics.f1)),
                ])


def sweep_thresholds(result: ExperimentResult, t1_list: Sequence[float],
                     gamma: Optional[float] = None) -> SweepResult:
    """Score every estimator at every threshold by re-scoring logged statistics."""
    if len(t1_list) == 0:
        raise ValueError("threshold list must not be empty")
    if gamma is None:
        gamma = result.cfg.detector.gamma
    rows = []
    best: dict[str, ConfusionMetrics] = {}
    for name, run in result.runs.items():
        for t1 in t1_list:
            metrics = rescore(run, float(t1), gamma)
            rows.append((name, metrics))
            if name not in best or metrics.f1 > best[name].f1:
                best[name] = metrics
    return SweepResult(rows=rows, best=best, gamma=gamma)


def calibrate_threshold_scale(run: EstimatorRun, quantile: float = 0.99,
                              grid_floor: float = 10.0) -> float:
    """Scale factor s mapping the sweep grid onto this run's statistic range.

    Chosen so that ``grid_floor * s`` lands at the given quantile of |s1| over
    the attack-free steps, i.e. the lowest sweep threshold sits just above the
    normal-operation excursions.
    """
    clean = np.abs(run.s1[run.window_full & ~run.attack_active])
    if clean.size == 0:
        raise ValueError("run has no attack-free steps with a full window")
    level = float(np.quantile(clean, quantile))
    return max(level, 1e-9) / grid_floor


def write_metrics_json(path, sweep: SweepResult) -> None:
    """Best-threshold confusion rates and F1 per estimator, schema-versioned."""
    payload = {
        "schema": METRICS_SCHEMA_VERSION,
        "estimators": {
            name: {
                "t1": metrics.threshold,
                "t2": sweep.gamma * metrics.threshold,
                "tp_rate": metrics.tp_rate,
                "fp_rate": metrics.fp_rate,
                "tn_rate": metrics.tn_rate,
                "fn_rate": metrics.fn_rate,
                "f1": metrics.f1,
            }
            for name, metrics in sweep.best.items()
        },
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
