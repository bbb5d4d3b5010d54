"""Discrete-time longitudinal vehicle simulator with synthetic driving scenarios.

The plant is a forward-motion-only point-mass model: traction acceleration
mapped affinely from a unified throttle/brake signal, opposed by speed-dependent
air drag, rolling resistance and road grade. Yaw rate follows a first-order lag
on the steering command. One simulation tick is 50 ms so that "next step" and
"50 ms ahead" coincide for the learned dynamics model.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

GRAVITY_MPS2 = 9.81

# Lumped resistance defaults are chosen so that at the 15 m/s cruise point the
# air-drag and rolling terms evaluate to 68.9 N and 271.6 N, the constants the
# baseline filter assumes (total 340.5 N on flat road).
CALIBRATION_SPEED_MPS = 15.0
AIR_DRAG_AT_CALIBRATION_N = 68.9
ROLLING_AT_CALIBRATION_N = 271.6

#: Fixed wire ordering of the measurement vector (m = 3).
MEASUREMENT_CHANNELS = ("accel", "speed", "yaw_rate")

SCENARIO_STYLES = ("cruise", "stop_and_go", "aggressive")

SIM_CSV_HEADER = (
    "time_s,throttle,brake,steer,u,speed,yaw_rate,accel,"
    "meas_accel,meas_speed,meas_yaw"
)


def unify_control(throttle: float, brake: float) -> float:
    """Fold throttle and brake into one command u = (T - B + 1) / 2 in [0, 1].

    u = 0 is full braking, u = 1 full throttle, u = 0.5 neutral coasting.
    """
    if not 0.0 <= throttle <= 1.0:
        raise ValueError(f"throttle out of [0, 1]: {throttle}")
    if not 0.0 <= brake <= 1.0:
        raise ValueError(f"brake out of [0, 1]: {brake}")
    return (throttle - brake + 1.0) / 2.0


@dataclass(frozen=True)
class VehicleParams:
    """Plant constants. Resistance coefficients are lumped (see module docs)."""

    mass_kg: float = 1500.0
    air_drag_coeff: float = AIR_DRAG_AT_CALIBRATION_N / CALIBRATION_SPEED_MPS**2
    roll_coeff: float = ROLLING_AT_CALIBRATION_N / CALIBRATION_SPEED_MPS
    grade_angle_rad: float = 0.0
    dt_s: float = 0.05
    traction_max_mps2: float = 4.0  # |a_f| at full throttle / full brake
    steer_gain: float = 0.05        # yaw-rate gain on steer * speed
    yaw_lag_s: float = 0.5          # first-order yaw time constant

    def __post_init__(self):
        if self.mass_kg <= 0:
            raise ValueError("mass_kg must be positive")
        if self.dt_s <= 0:
            raise ValueError("dt_s must be positive")
        if self.air_drag_coeff < 0 or self.roll_coeff < 0:
            raise ValueError("resistance coefficients must be >= 0")


@dataclass(frozen=True)
class VehicleState:
    """Kinematic ground truth; speed is clamped at zero (no reverse)."""

    speed_mps: float = 0.0
    yaw_rate_rps: float = 0.0
    accel_mps2: float = 0.0
    time_s: float = 0.0


@dataclass(frozen=True)
class ControlCommand:
    throttle: float = 0.0
    brake: float = 0.0
    steer: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.throttle <= 1.0:
            raise ValueError(f"throttle out of [0, 1]: {self.throttle}")
        if not 0.0 <= self.brake <= 1.0:
            raise ValueError(f"brake out of [0, 1]: {self.brake}")
        if not -1.0 <= self.steer <= 1.0:
            raise ValueError(f"steer out of [-1, 1]: {self.steer}")

    @property
    def unified(self) -> float:
        return unify_control(self.throttle, self.brake)


@dataclass(frozen=True)
class Measurement:
    """Sensor snapshot in the fixed [accel, speed, yaw_rate] ordering."""

    accel_mps2: float
    speed_mps: float
    yaw_rate_rps: float
    time_s: float

    def as_vector(self) -> np.ndarray:
        return np.array([self.accel_mps2, self.speed_mps, self.yaw_rate_rps])


def resistance_force_n(params: VehicleParams, speed_mps: float) -> float:
    """Total resistive force: air drag + rolling + grade, in newtons."""
    air = params.air_drag_coeff * speed_mps**2
    roll = params.roll_coeff * speed_mps
    grade = params.mass_kg * GRAVITY_MPS2 * np.sin(params.grade_angle_rad)
    return air + roll + grade


def traction_accel_mps2(params: VehicleParams, u: float) -> float:
    """Affine map from the unified command to traction acceleration (u=0.5 -> 0)."""
    return params.traction_max_mps2 * (2.0 * u - 1.0)


def equilibrium_control(params: VehicleParams, speed_mps: float) -> float:
    """Unified command that exactly balances resistance at the given speed."""
    a_hold = resistance_force_n(params, speed_mps) / params.mass_kg
    return (a_hold / params.traction_max_mps2 + 1.0) / 2.0


def step(params: VehicleParams, state: VehicleState, cmd: ControlCommand) -> VehicleState:
    """Advance the plant one tick.

    Acceleration is traction minus resistance-per-mass; speed integrates with a
    zero floor; yaw rate relaxes toward steer_gain * steer * speed.
    """
    u = cmd.unified
    accel = traction_accel_mps2(params, u) - resistance_force_n(params, state.speed_mps) / params.mass_kg
    speed = max(0.0, state.speed_mps + accel * params.dt_s)
    yaw_target = params.steer_gain * cmd.steer * state.speed_mps
    yaw = state.yaw_rate_rps + params.dt_s * (yaw_target - state.yaw_rate_rps) / params.yaw_lag_s
    return VehicleState(
        speed_mps=speed,
        yaw_rate_rps=yaw,
        accel_mps2=accel,
        time_s=state.time_s + params.dt_s,
    )


def measure(state: VehicleState, noise_std: Sequence[float], rng: np.random.Generator) -> Measurement:
    """Emit a sensor reading, each channel perturbed by zero-mean Gaussian noise."""
    std = np.asarray(noise_std, dtype=float)
    if std.shape != (3,) or np.any(std < 0):
        raise ValueError("noise_std must be three non-negative values")
    noise = std * rng.standard_normal(3)
    return Measurement(
        accel_mps2=state.accel_mps2 + noise[0],
        speed_mps=state.speed_mps + noise[1],
        yaw_rate_rps=state.yaw_rate_rps + noise[2],
        time_s=state.time_s,
    )


@dataclass(frozen=True)
class Scenario:
    """Seeded open-loop driving profile: command keyframes plus sensor noise."""

    duration_s: float
    seed: int
    keyframes: tuple  # ((time_s, ControlCommand), ...) with monotone times
    interpolation: str = "linear"  # or "hold"
    noise_std: tuple = (0.1, 0.1, 0.01)

    def __post_init__(self):
        if self.duration_s <= 0:
            raise ValueError("duration_s must be positive")
        if self.interpolation not in ("linear", "hold"):
            raise ValueError(f"unknown interpolation: {self.interpolation}")
        times = [t for t, _ in self.keyframes]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError("keyframe times must be strictly increasing")

    def command_at(self, t: float) -> ControlCommand:
        times = [kt for kt, _ in self.keyframes]
        cmds = [c for _, c in self.keyframes]
        if t <= times[0]:
            return cmds[0]
        if t >= times[-1]:
            return cmds[-1]
        idx = int(np.searchsorted(times, t, side="right")) - 1
        if self.interpolation == "hold":
            return cmds[idx]
        t0, t1 = times[idx], times[idx + 1]
        w = (t - t0) / (t1 - t0)
        c0, c1 = cmds[idx], cmds[idx + 1]
        return ControlCommand(
            throttle=c0.throttle + w * (c1.throttle - c0.throttle),
            brake=c0.brake + w * (c1.brake - c0.brake),
            steer=c0.steer + w * (c1.steer - c0.steer),
        )


def generate_scenario(seed: int, duration_s: float, style: str = "stop_and_go",
                      noise_std: Sequence[float] = (0.1, 0.1, 0.01)) -> Scenario:
    """Build a deterministic-in-seed keyframe profile for the given driving style.

    Throttle and brake phases never overlap at keyframes; a coast keyframe is
    inserted at every phase switch so linear interpolation cannot produce
    simultaneous high throttle and brake.
    """
    if duration_s <= 0:
        raise ValueError("duration_s must be positive")
    if style not in SCENARIO_STYLES:
        raise ValueError(f"style must be one of {SCENARIO_STYLES}")
    rng = np.random.default_rng([seed, SCENARIO_STYLES.index(style)])

    frames: list[tuple[float, ControlCommand]] = [(0.0, ControlCommand())]
    t = 0.0
    while t < duration_s:
        if style == "cruise":
            t += rng.uniform(2.0, 4.0)
            throttle = float(np.clip(rng.normal(0.06, 0.03), 0.0, 0.2))
            cmd = ControlCommand(throttle=throttle, brake=0.0,
                                 steer=float(np.clip(rng.normal(0.0, 0.05), -0.2, 0.2)))
            frames.append((t, cmd))
        elif style == "stop_and_go":
            # accelerate / coast / brake / coast cycle
            steer = float(np.clip(rng.normal(0.0, 0.1), -0.3, 0.3))
            t += rng.uniform(1.0, 2.0)
            frames.append((t, ControlCommand(throttle=float(rng.uniform(0.15, 0.6)), steer=steer)))
            t += rng.uniform(2.0, 4.0)
            frames.append((t, ControlCommand(steer=steer)))
            t += rng.uniform(1.0, 2.0)
            frames.append((t, ControlCommand(brake=float(rng.uniform(0.2, 0.7)), steer=steer)))
            t += rng.uniform(1.0, 3.0)
            frames.append((t, ControlCommand(steer=steer)))
        else:  # aggressive
            t += rng.uniform(0.8, 1.6)
            steer = float(rng.uniform(-0.8, 0.8))
            if rng.random() < 0.55:
                frames.append((t, ControlCommand(throttle=float(rng.uniform(0.3, 1.0)), steer=steer)))
            else:
                frames.append((t, ControlCommand(brake=float(rng.uniform(0.3, 1.0)), steer=steer)))
            t += rng.uniform(0.8, 1.6)
            frames.append((t, ControlCommand(steer=steer * 0.5)))

    return Scenario(
        duration_s=duration_s,
        seed=seed,
        keyframes=tuple(frames),
        interpolation="linear",
        noise_std=tuple(float(s) for s in noise_std),
    )


@dataclass
class RunLog:
    """Column-oriented record of one simulated run (one row per tick)."""

    time_s: np.ndarray
    throttle: np.ndarray
    brake: np.ndarray
    steer: np.ndarray
    u: np.ndarray
    speed: np.ndarray
    yaw_rate: np.ndarray
    accel: np.ndarray
    meas: np.ndarray  # (n, 3) in MEASUREMENT_CHANNELS order

    def __len__(self) -> int:
        return len(self.time_s)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(SIM_CSV_HEADER.split(","))
            for i in range(len(self)):
                writer.writerow([
                    repr(float(v)) for v in (
                        self.time_s[i], self.throttle[i], self.brake[i],
                        self.steer[i], self.u[i], self.speed[i],
                        self.yaw_rate[i], self.accel[i],
                        self.meas[i, 0], self.meas[i, 1], self.meas[i, 2],
                    )
                ])

    @classmethod
    def read_csv(cls, path) -> "RunLog":
        data = np.genfromtxt(path, delimiter=",", names=True)
        cols = SIM_CSV_HEADER.split(",")
        if data.dtype.names is None or tuple(data.dtype.names) != tuple(cols):
            raise ValueError(f"unexpected simulation log header in {path}")
        get = lambda name: np.atleast_1d(data[name]).astype(float)
        return cls(
            time_s=get("time_s"), throttle=get("throttle"), brake=get("brake"),
            steer=get("steer"), u=get("u"), speed=get("speed"),
            yaw_rate=get("yaw_rate"), accel=get("accel"),
            meas=np.column_stack([get("meas_accel"), get("meas_speed"), get("meas_yaw")]),
        )


DEFAULT_INITIAL_STATE = VehicleState(speed_mps=10.0)


def run_log(params: VehicleParams, scenario: Scenario,
            initial_state: VehicleState = DEFAULT_INITIAL_STATE) -> RunLog:
    """Simulate the scenario open loop and log state + noisy measurements.

    Row k holds the commands issued at t_k and the state/measurement at t_k, so
    row k+1's acceleration is the one-tick-ahead training target for row k.
    """
    n = int(round(scenario.duration_s / params.dt_s))
    if n < 2:
        raise ValueError("scenario too short: need at least one prediction horizon")
    rng = np.random.default_rng(scenario.seed)
    state = replace(initial_state, time_s=0.0)

    cols = {name: np.zeros(n) for name in
            ("time_s", "throttle", "brake", "steer", "u", "speed", "yaw_rate", "accel")}
    meas = np.zeros((n, 3))
    for k in range(n):
        t = k * params.dt_s
        cmd = scenario.command_at(t)
        y = measure(state, scenario.noise_std, rng)
        cols["time_s"][k] = t
        cols["throttle"][k] = cmd.throttle
        cols["brake"][k] = cmd.brake
        cols["steer"][k] = cmd.steer
        cols["u"][k] = cmd.unified
        cols["speed"][k] = state.speed_mps
        cols["yaw_rate"][k] = state.yaw_rate_rps
        cols["accel"][k] = state.accel_mps2
        meas[k] = y.as_vector()
        state = step(params, state, cmd)

    return RunLog(meas=meas, **cols)
