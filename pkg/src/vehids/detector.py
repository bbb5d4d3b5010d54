"""Sliding-window CUSUM attack detector over filter residuals.

Two statistics are maintained on the last N residual vectors: a weighted sum
(test 1) and a weighted dispersion around the window mean (test 2). The alarm
fires only when both exceed their thresholds, where the second threshold is a
fixed fraction of the first. The flag is recomputed every step; there is no
latching. Alarms are suppressed until the window has filled once, which keeps
start-up transients from registering as attacks.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

DEFAULT_W_R1 = (1.0, 0.01, 0.0)
DEFAULT_W_R2_DIAG = (1.0, 0.01, 0.0)
DEFAULT_GAMMA = 0.04


def _as_psd_matrix(w_r2, m: int) -> np.ndarray:
    mat = np.asarray(w_r2, dtype=float)
    if mat.ndim == 1:
        mat = np.diag(mat)
    if mat.shape != (m, m):
        raise ValueError(f"w_r2 must be {m}x{m}, got {mat.shape}")
    if np.max(np.abs(mat - mat.T)) > 1e-12:
        raise ValueError("w_r2 must be symmetric")
    if np.min(np.linalg.eigvalsh(mat)) < -1e-12:
        raise ValueError("w_r2 must be positive semi-definite")
    return mat


@dataclass(frozen=True)
class DetectorConfig:
    """Window length, residual weights and thresholds (t2 = gamma * t1)."""

    window_n: int = 40
    w_r1: tuple = DEFAULT_W_R1
    w_r2: tuple = DEFAULT_W_R2_DIAG  # diagonal or full m x m matrix
    t1: float = 13.33
    gamma: float = DEFAULT_GAMMA

    def __post_init__(self):
        if self.window_n < 2:
            raise ValueError("window_n must be >= 2")
        if self.t1 <= 0 or self.gamma <= 0:
            raise ValueError("t1 and gamma must be positive")
        w1 = np.asarray(self.w_r1, dtype=float)
        _as_psd_matrix(self.w_r2, w1.shape[0])

    @property
    def m(self) -> int:
        return len(self.w_r1)

    @property
    def t2(self) -> float:
        return self.gamma * self.t1

    def w_r1_vector(self) -> np.ndarray:
        return np.asarray(self.w_r1, dtype=float)

    def w_r2_matrix(self) -> np.ndarray:
        return _as_psd_matrix(self.w_r2, self.m)


@dataclass(frozen=True)
class DetectorState:
    """Residual window plus the statistics and flag computed from it."""

    window: tuple = ()
    s1: float = 0.0
    s2: float = 0.0
    alarm: bool = False
    rejected: int = 0

    def window_full(self, cfg: DetectorConfig) -> bool:
        return len(self.window) >= cfg.window_n


def test1(window, w_r1) -> float:
    """Weighted residual sum over the window: sum_i w_r1 . r_i."""
    if len(window) < 1:
        raise ValueError("test1 needs at least one residual")
    stacked = np.vstack(window)
    return float(np.sum(stacked @ np.asarray(w_r1, dtype=float)))


def test2(window, w_r2) -> float:
    """Weighted dispersion around the window mean: sum_i (r_i - rbar)' W (r_i - rbar).

    Returns 0 below two samples, where dispersion is undefined.
    """
    if len(window) < 2:
        return 0.0
    stacked = np.vstack(window)
    dev = stacked - stacked.mean(axis=0)
    mat = _as_psd_matrix(w_r2, stacked.shape[1])
    return float(np.sum((dev @ mat) * dev))


def alarm(s1: float, s2: float, cfg: DetectorConfig) -> bool:
    """Both tests must exceed: |s1| > t1 and s2 > t2. Memoryless.

    The magnitude test uses |s1| so that negative residual sums (for example a
    zeroed accelerometer while the vehicle really accelerates) also trigger.
    """
    return abs(s1) > cfg.t1 and s2 > cfg.t2


def push_residual(state: DetectorState, cfg: DetectorConfig, r) -> DetectorState:
    """Append a residual, evict beyond the window, recompute both statistics.

    Non-finite residuals are rejected and counted without touching the window.
    Alarms are suppressed until the window has filled.
    """
    vec = np.asarray(r, dtype=float)
    if vec.shape != (cfg.m,):
        raise ValueError(f"residual must have dimension {cfg.m}, got shape {vec.shape}")
    if not np.all(np.isfinite(vec)):
        return replace(state, rejected=state.rejected + 1)

    window = (state.window + (vec,))[-cfg.window_n:]
    s1 = test1(window, cfg.w_r1_vector())
    s2 = test2(window, cfg.w_r2_matrix())
    flag = alarm(s1, s2, cfg) if len(window) >= cfg.window_n else False
    return DetectorState(window=window, s1=s1, s2=s2, alarm=flag, rejected=state.rejected)
