"""DoS attack injection: PWM-scheduled zeroing of actuator and sensor channels.

A blocked channel reads 0 while the schedule is active; everything else passes
through untouched. Actuator-side and sensor-side masks share the same schedule
type but are independent instances, so pure-actuator and pure-sensor
experiments use one mechanism.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class AttackSchedule:
    """On/off activation pattern: PWM with fixed period and duty inside [start, end)."""

    start_s: float = 20.0
    pwm_period_s: float = 2.0
    pwm_duty: float = 0.5
    end_s: float = math.inf

    def __post_init__(self):
        if self.start_s < 0:
            raise ValueError("start_s must be >= 0")
        if self.pwm_period_s <= 0:
            raise ValueError("pwm_period_s must be positive")
        if not 0.0 <= self.pwm_duty <= 1.0:
            raise ValueError("pwm_duty must be in [0, 1]")
        if self.start_s >= self.end_s:
            raise ValueError("start_s must be < end_s")


def is_active(schedule: AttackSchedule, t: float) -> bool:
    """True iff t falls in an on-phase of the PWM pattern."""
    if t < 0:
        raise ValueError("t must be >= 0")
    if not schedule.start_s <= t < schedule.end_s:
        return False
    phase = (t - schedule.start_s) % schedule.pwm_period_s
    return phase < schedule.pwm_duty * schedule.pwm_period_s


@dataclass(frozen=True)
class AttackTargets:
    """1-based channel indices blocked on each side; either side may be empty."""

    actuator_indices: frozenset = frozenset()
    sensor_indices: frozenset = frozenset()
    actuator_dim: int = 3
    sensor_dim: int = 3

    def __post_init__(self):
        object.__setattr__(self, "actuator_indices", frozenset(self.actuator_indices))
        object.__setattr__(self, "sensor_indices", frozenset(self.sensor_indices))
        for idx in self.actuator_indices:
            if not 1 <= idx <= self.actuator_dim:
                raise ValueError(f"actuator index {idx} out of 1..{self.actuator_dim}")
        for idx in self.sensor_indices:
            if not 1 <= idx <= self.sensor_dim:
                raise ValueError(f"sensor index {idx} out of 1..{self.sensor_dim}")


def _mask(vector, indices, dim: int, active: bool) -> np.ndarray:
    vec = np.asarray(vector, dtype=float).copy()
    if vec.shape != (dim,):
        raise ValueError(f"expected vector of length {dim}, got shape {vec.shape}")
    if active:
        for idx in indices:
            vec[idx - 1] = 0.0
    return vec


def attack_actuator(cmd_vector, targets: AttackTargets, active: bool) -> np.ndarray:
    """Zero the targeted actuator channels while the attack is active."""
    return _mask(cmd_vector, targets.actuator_indices, targets.actuator_dim, active)


def attack_sensor(measurement_vector, targets: AttackTargets, active: bool) -> np.ndarray:
    """Zero the targeted sensor channels while the attack is active."""
    return _mask(measurement_vector, targets.sensor_indices, targets.sensor_dim, active)
