"""Structured text run configuration: key = value pairs, one section per module.

Every key has a default, so a minimal file needs only the bits under study::

    [scenario]
    style = stop_and_go
    duration_s = 60
    seed = 7

    [attack]
    targets = actuator:[1] sensor:[]
"""

from __future__ import annotations

import configparser
import re
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .attacks import AttackSchedule, AttackTargets
from .detector import DetectorConfig
from .estimators import UtParams
from .learner import OnlineAdaptConfig, TrainConfig
from .vehicle import Scenario, VehicleParams, VehicleState, generate_scenario

ESTIMATOR_CHOICES = ("kf", "ukf_ml", "both")

R_MEAS_FLOOR = 1e-6


class ConfigError(ValueError):
    """Bad or inconsistent run configuration."""


EXAMPLE_CONFIG = """\
# vehids run configuration. Unset keys fall back to defaults.

[vehicle]
mass_kg = 1500
grade_angle_rad = 0.0
dt_s = 0.05
traction_max_mps2 = 4.0

[scenario]
style = stop_and_go          # cruise | stop_and_go | aggressive
duration_s = 60.0
seed = 7
noise_std = 0.1, 0.1, 0.01   # accel, speed, yaw_rate
initial_speed = 10.0

[attack]
start_s = 20.0
period_s = 2.0
duty = 0.5
end_s = 60.0
targets = actuator:[1] sensor:[]   # 1-based channel indices

[filter]
estimator = both             # kf | ukf_ml | both
model_file = model.txt       # resolved against the output directory
phi = 1.0
beta_prior = 2.0
q_proc_diag = 0.001, 0.001, 0.001
s_rate = 1.0
adapt = true
online_lr = 0.001

[detector]
window_n = 40
w_r1 = 1, 0.01, 0
w_r2_diag = 1, 0.01, 0
t1 = 13.33
gamma = 0.04

[train]
style = aggressive
duration_s = 120.0
epochs = 1000
batch_size = 64
base_lr = 0.001
train_fraction = 0.8

[sweep]
t1_min = 10.0
t1_max = 25.0
t1_count = 30
scale = auto                 # or a numeric multiplier for the grid
"""


@dataclass
class RunConfig:
    """Everything one experiment needs, already validated and typed."""

    vehicle: VehicleParams
    scenario: Scenario
    initial_state: VehicleState
    schedule: AttackSchedule
    targets: AttackTargets
    estimator: str
    ut: UtParams
    q_proc: np.ndarray
    r_meas: np.ndarray
    model_file: str
    adapt: OnlineAdaptConfig
    online_lr: float
    detector: DetectorConfig
    train: TrainConfig
    train_style: str
    train_duration_s: float
    train_seed: int
    sweep_t1: tuple
    sweep_scale: object  # float or "auto"
    seed: int

    @property
    def estimators(self) -> tuple:
        return ("kf", "ukf_ml") if self.estimator == "both" else (self.estimator,)


class _Section:
    """configparser section wrapper that raises ConfigError with context."""

    def __init__(self, parser: configparser.ConfigParser, name: str):
        self._name = name
        self._raw = dict(parser[name]) if parser.has_section(name) else {}

    def _get(self, key, cast, default):
        if key not in self._raw:
            return default
        try:
            return cast(self._raw[key])
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"[{self._name}] {key}: {exc}") from exc

    def getfloat(self, key, default=None):
        return self._get(key, float, default)

    def getint(self, key, default=None):
        return self._get(key, int, default)

    def getbool(self, key, default=None):
        def cast(raw):
            low = raw.strip().lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(f"not a boolean: {raw!r}")
        return self._get(key, cast, default)

    def getstr(self, key, default=None):
        return self._get(key, lambda s: s.strip(), default)

    def getfloats(self, key, default=None):
        def cast(raw):
            return tuple(float(part) for part in raw.split(","))
        return self._get(key, cast, default)


_TARGETS_RE = re.compile(r"actuator:\[([\d,\s]*)\]\s*sensor:\[([\d,\s]*)\]")


def _parse_targets(raw: str) -> tuple:
    match = _TARGETS_RE.fullmatch(raw.strip())
    if not match:
        raise ConfigError(
            f"attack targets must look like 'actuator:[1] sensor:[]', got {raw!r}"
        )
    def indices(group):
        return frozenset(int(tok) for tok in group.split(",") if tok.strip())
    return indices(match.group(1)), indices(match.group(2))


def load_run_config(path, seed_override: Optional[int] = None) -> RunConfig:
    """Parse and validate a run configuration file."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    read = parser.read(path)
    if not read:
        raise ConfigError(f"cannot read config file: {path}")

    veh = _Section(parser, "vehicle")
    scn = _Section(parser, "scenario")
    atk = _Section(parser, "attack")
    flt = _Section(parser, "filter")
    det = _Section(parser, "detector")
    trn = _Section(parser, "train")
    swp = _Section(parser, "sweep")

    try:
        defaults = VehicleParams()
        vehicle = VehicleParams(
            mass_kg=veh.getfloat("mass_kg", defaults.mass_kg),
            air_drag_coeff=veh.getfloat("air_drag_coeff", defaults.air_drag_coeff),
            roll_coeff=veh.getfloat("roll_coeff", defaults.roll_coeff),
            grade_angle_rad=veh.getfloat("grade_angle_rad", defaults.grade_angle_rad),
            dt_s=veh.getfloat("dt_s", defaults.dt_s),
            traction_max_mps2=veh.getfloat("traction_max_mps2", defaults.traction_max_mps2),
            steer_gain=veh.getfloat("steer_gain", defaults.steer_gain),
            yaw_lag_s=veh.getfloat("yaw_lag_s", defaults.yaw_lag_s),
        )

        seed = scn.getint("seed", 0)
        if seed_override is not None:
            seed = seed_override
        style = scn.getstr("style", "stop_and_go")
        noise_std = scn.getfloats("noise_std", (0.1, 0.1, 0.01))
        if len(noise_std) != 3:
            raise ConfigError("[scenario] noise_std needs exactly 3 values")
        scenario = generate_scenario(
            seed=seed,
            duration_s=scn.getfloat("duration_s", 60.0),
            style=style,
            noise_std=noise_std,
        )
        initial_state = VehicleState(speed_mps=scn.getfloat("initial_speed", 10.0))

        start_s = atk.getfloat("start_s", 20.0)
        schedule = AttackSchedule(
            start_s=start_s,
            pwm_period_s=atk.getfloat("period_s", 2.0),
            pwm_duty=atk.getfloat("duty", 0.5),
            end_s=atk.getfloat("end_s", start_s + 40.0),
        )
        raw_targets = atk.getstr("targets", "actuator:[1] sensor:[]")
        actuator_idx, sensor_idx = _parse_targets(raw_targets)
        targets = AttackTargets(actuator_indices=actuator_idx, sensor_indices=sensor_idx)

        estimator = flt.getstr("estimator", "both")
        if estimator not in ESTIMATOR_CHOICES:
            raise ConfigError(f"[filter] estimator must be one of {ESTIMATOR_CHOICES}")
        ut = UtParams(
            phi=flt.getfloat("phi", 1.0),
            kappa=flt.getfloat("kappa", None),
            beta_prior=flt.getfloat("beta_prior", 2.0),
        )
        q_diag = flt.getfloats("q_proc_diag", (1e-3, 1e-3, 1e-3))
        r_diag = flt.getfloats(
            "r_meas_diag",
            tuple(max(std**2, R_MEAS_FLOOR) for std in noise_std),
        )
        if len(q_diag) != 3 or len(r_diag) != 3:
            raise ConfigError("[filter] q_proc_diag and r_meas_diag need 3 values")
        adapt = OnlineAdaptConfig(
            s_rate=flt.getfloat("s_rate", 1.0),
            enabled=flt.getbool("adapt", True),
        )

        detector = DetectorConfig(
            window_n=det.getint("window_n", 40),
            w_r1=det.getfloats("w_r1", (1.0, 0.01, 0.0)),
            w_r2=det.getfloats("w_r2_diag", (1.0, 0.01, 0.0)),
            t1=det.getfloat("t1", 13.33),
            gamma=det.getfloat("gamma", 0.04),
        )

        train = TrainConfig(
            base_lr=trn.getfloat("base_lr", 0.001),
            train_fraction=trn.getfloat("train_fraction", 0.8),
            epochs=trn.getint("epochs", 1000),
            batch_size=trn.getint("batch_size", 64),
            seed=seed,
        )

        if swp.getstr("t1_list"):
            sweep_t1 = swp.getfloats("t1_list")
        else:
            sweep_t1 = tuple(np.linspace(
                swp.getfloat("t1_min", 10.0),
                swp.getfloat("t1_max", 25.0),
                swp.getint("t1_count", 30),
            ))
        raw_scale = swp.getstr("scale", "auto")
        sweep_scale = "auto" if raw_scale == "auto" else float(raw_scale)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    steps = int(round(scenario.duration_s / vehicle.dt_s))
    if steps - 1 < detector.window_n:
        raise ConfigError(
            "scenario shorter than the detector window: "
            f"{steps - 1} detector steps < window_n={detector.window_n}"
        )

    return RunConfig(
        vehicle=vehicle,
        scenario=scenario,
        initial_state=initial_state,
        schedule=schedule,
        targets=targets,
        estimator=estimator,
        ut=ut,
        q_proc=np.diag(q_diag),
        r_meas=np.diag(r_diag),
        model_file=flt.getstr("model_file", "model.txt"),
        adapt=adapt,
        online_lr=flt.getfloat("online_lr", 0.001),
        detector=detector,
        train=train,
        train_style=trn.getstr("style", "aggressive"),
        train_duration_s=trn.getfloat("duration_s", 120.0),
        train_seed=trn.getint("seed", seed + 1),
        sweep_t1=sweep_t1,
        sweep_scale=sweep_scale,
        seed=seed,
    )
