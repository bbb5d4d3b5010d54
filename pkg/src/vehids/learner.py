"""Learned longitudinal dynamics: a small ReLU network trained on driving logs.

The network maps [unified command, steer, speed, yaw rate, accel] to the
acceleration one tick (50 ms) ahead. Offline it is fit with mini-batch Adam on
squared error; online it receives single-sample updates whose step size is
gated by a sigmoid of the filter residual norm, so the model freezes itself
while the data looks attacked and keeps adapting while driving looks normal.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.special import expit

from .estimators import ProcessModel
from .vehicle import RunLog, VehicleParams

N_INPUTS = 5
N_HIDDEN = 20
N_OUTPUTS = 1

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8

MODEL_FILE_MAGIC = "vehids-mlp"
MODEL_FILE_VERSION = 1


class TrainingDivergedError(RuntimeError):
    def __init__(self, epoch: int):
        super().__init__(f"training loss became non-finite at epoch {epoch}")
        self.epoch = epoch


@dataclass
class MlpModel:
    """5 -> 20 -> 1 network with ReLU hidden activation (architecture fixed)."""

    w1: np.ndarray  # (20, 5)
    b1: np.ndarray  # (20,)
    w2: np.ndarray  # (1, 20)
    b2: np.ndarray  # (1,)

    def __post_init__(self):
        if self.w1.shape != (N_HIDDEN, N_INPUTS) or self.b1.shape != (N_HIDDEN,):
            raise ValueError("hidden layer has wrong shape")
        if self.w2.shape != (N_OUTPUTS, N_HIDDEN) or self.b2.shape != (N_OUTPUTS,):
            raise ValueError("output layer has wrong shape")

    def params(self) -> list[np.ndarray]:
        return [self.w1, self.b1, self.w2, self.b2]

    def clone(self) -> "MlpModel":
        return MlpModel(self.w1.copy(), self.b1.copy(), self.w2.copy(), self.b2.copy())

    def all_finite(self) -> bool:
        return all(np.all(np.isfinite(p)) for p in self.params())


def init_model(seed: int) -> MlpModel:
    """He-scaled Gaussian weights, zero biases, deterministic in the seed."""
    rng = np.random.default_rng(seed)
    return MlpModel(
        w1=rng.standard_normal((N_HIDDEN, N_INPUTS)) * np.sqrt(2.0 / N_INPUTS),
        b1=np.zeros(N_HIDDEN),
        w2=rng.standard_normal((N_OUTPUTS, N_HIDDEN)) * np.sqrt(2.0 / N_HIDDEN),
        b2=np.zeros(N_OUTPUTS),
    )


def forward(model: MlpModel, x: Sequence[float]) -> float:
    """Single-sample prediction b2 + w2 relu(w1 x + b1)."""
    x = np.asarray(x, dtype=float)
    hidden = np.maximum(0.0, model.w1 @ x + model.b1)
    return float(model.b2[0] + model.w2[0] @ hidden)


def forward_batch(model: MlpModel, x: np.ndarray) -> np.ndarray:
    hidden = np.maximum(0.0, x @ model.w1.T + model.b1)
    return hidden @ model.w2[0] + model.b2[0]


def gradients(model: MlpModel, x: np.ndarray, target: np.ndarray) -> list[np.ndarray]:
    """Backprop gradients of mean squared error over the batch.

    Returns [dw1, db1, dw2, db2] matching ``MlpModel.params()`` order.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    target = np.atleast_1d(np.asarray(target, dtype=float))
    z1 = x @ model.w1.T + model.b1          # (B, 20)
    hidden = np.maximum(0.0, z1)
    pred = hidden @ model.w2[0] + model.b2[0]

    d_out = 2.0 * (pred - target) / len(target)      # dL/dpred
    dw2 = (d_out @ hidden)[None, :]
    db2 = np.array([d_out.sum()])
    d_hidden = np.outer(d_out, model.w2[0]) * (z1 > 0.0)
    dw1 = d_hidden.T @ x
    db1 = d_hidden.sum(axis=0)
    return [dw1, db1, dw2, db2]


class AdamOptimizer:
    """Standard Adam with bias correction, acting in place on a parameter list."""

    def __init__(self, shapes: Sequence[tuple]):
        self.m = [np.zeros(s) for s in shapes]
        self.v = [np.zeros(s) for s in shapes]
        self.t = 0

    def step(self, params: Sequence[np.ndarray], grads: Sequence[np.ndarray], lr: float) -> None:
        self.t += 1
        bias1 = 1.0 - ADAM_BETA1**self.t
        bias2 = 1.0 - ADAM_BETA2**self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= ADAM_BETA1
            m += (1.0 - ADAM_BETA1) * g
            v *= ADAM_BETA2
            v += (1.0 - ADAM_BETA2) * g * g
            p -= lr * (m / bias1) / (np.sqrt(v / bias2) + ADAM_EPS)


@dataclass(frozen=True)
class TrainConfig:
    base_lr: float = 0.001
    train_fraction: float = 0.8
    epochs: int = 1000
    batch_size: int = 64
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise ValueError("train_fraction must be in (0, 1)")
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be >= 1")


@dataclass(frozen=True)
class TrainingSample:
    """One streaming sample: commands + sensed state now, sensed accel next tick."""

    input: np.ndarray  # [u_unified, steer, speed, yaw_rate, accel]
    target: float


@dataclass
class TrainResult:
    model: MlpModel
    train_mse: np.ndarray  # per epoch, full training set
    val_mse: np.ndarray
    n_train: int
    n_val: int
    n_outliers_dropped: int


def build_training_samples(log: RunLog) -> tuple[np.ndarray, np.ndarray]:
    """Pair each row's commands and sensed state with the next row's sensed accel."""
    if len(log) < 2:
        raise ValueError("log too short to form one prediction horizon")
    x = np.column_stack([
        log.u[:-1], log.steer[:-1],
        log.meas[:-1, 1],  # speed
        log.meas[:-1, 2],  # yaw rate
        log.meas[:-1, 0],  # accel
    ])
    y = log.meas[1:, 0]
    return x, y


def drop_outliers(x: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray, int]:
    """Remove samples where any channel strays beyond 3 sample-std of its mean."""
    data = np.column_stack([x, y])
    mean = data.mean(axis=0)
    std = data.std(axis=0)
    keep = np.all(np.abs(data - mean) <= 3.0 * np.maximum(std, 1e-12), axis=1)
    return x[keep], y[keep], int(np.sum(~keep))


def train_offline(log: RunLog, cfg: TrainConfig) -> TrainResult:
    """Fit the network with shuffled-split mini-batch Adam on squared error."""
    x_all, y_all = build_training_samples(log)
    x_all, y_all, n_dropped = drop_outliers(x_all, y_all)
    if len(y_all) < 10 * cfg.batch_size:
        raise ValueError(
            f"insufficient data: {len(y_all)} samples after preprocessing, "
            f"need at least {10 * cfg.batch_size}"
        )

    rng = np.random.default_rng(cfg.seed)
    perm = rng.permutation(len(y_all))
    n_train = int(cfg.train_fraction * len(y_all))
    train_idx, val_idx = perm[:n_train], perm[n_train:]
    x_train, y_train = x_all[train_idx], y_all[train_idx]
    x_val, y_val = x_all[val_idx], y_all[val_idx]

    model = init_model(cfg.seed)
    optimizer = AdamOptimizer([p.shape for p in model.params()])
    train_mse = np.zeros(cfg.epochs)
    val_mse = np.zeros(cfg.epochs)

    for epoch in range(cfg.epochs):
        order = rng.permutation(n_train)
        for start in range(0, n_train, cfg.batch_size):
            batch = order[start:start + cfg.batch_size]
            grads = gradients(model, x_train[batch], y_train[batch])
            optimizer.step(model.params(), grads, cfg.base_lr)
        train_mse[epoch] = float(np.mean((forward_batch(model, x_train) - y_train) ** 2))
        val_mse[epoch] = float(np.mean((forward_batch(model, x_val) - y_val) ** 2))
        if not np.isfinite(train_mse[epoch]) or not model.all_finite():
            raise TrainingDivergedError(epoch)

    return TrainResult(
        model=model,
        train_mse=train_mse,
        val_mse=val_mse,
        n_train=n_train,
        n_val=len(y_val),
        n_outliers_dropped=n_dropped,
    )


def adaptive_rate(residual: Sequence[float], s_rate: float) -> float:
    """Residual-gated learning-rate factor l = 1 - 1/(1 + exp(-s_rate ||r||)).

    Equals 0.5 at zero residual, decays monotonically toward 0 as the residual
    grows; computed as expit(-s_rate ||r||) which underflows cleanly to 0.0 for
    very large residuals.
    """
    if s_rate <= 0:
        raise ValueError("s_rate must be positive")
    norm = float(np.linalg.norm(np.asarray(residual, dtype=float)))
    return float(expit(-s_rate * norm))


@dataclass(frozen=True)
class OnlineAdaptConfig:
    s_rate: float = 1.0
    enabled: bool = True

    def __post_init__(self):
        if self.s_rate <= 0:
            raise ValueError("s_rate must be positive")


class OnlineAdapter:
    """Streams residual-gated single-sample updates into a private model copy.

    The wrapped model object is mutated in place so a filter holding it sees
    every accepted update; non-finite gradients are skipped and counted.
    """

    def __init__(self, model: MlpModel, cfg: OnlineAdaptConfig, base_lr: float = 0.001):
        self.model = model.clone()
        self.cfg = cfg
        self.base_lr = base_lr
        self.skipped = 0
        self._optimizer = AdamOptimizer([p.shape for p in self.model.params()])

    def update(self, sample: TrainingSample, residual: Sequence[float]) -> float:
        """Apply one gated step; returns the effective learning rate used."""
        if not self.cfg.enabled:
            return 0.0
        rate = self.base_lr * adaptive_rate(residual, self.cfg.s_rate)
        grads = gradients(self.model, sample.input, np.array([sample.target]))
        if not all(np.all(np.isfinite(g)) for g in grads):
            self.skipped += 1
            return 0.0
        self._optimizer.step(self.model.params(), grads, rate)
        return rate


def online_update(model: MlpModel, sample: TrainingSample, residual: Sequence[float],
                  cfg: OnlineAdaptConfig, base_lr: float = 0.001) -> MlpModel:
    """Single gated update as a pure function (fresh optimizer state).

    Streaming callers should hold an :class:`OnlineAdapter` instead so the
    optimizer moments persist across samples.
    """
    adapter = OnlineAdapter(model, cfg, base_lr)
    adapter.update(sample, residual)
    return adapter.model


class MlpProcessModel(ProcessModel):
    """Adapts the network to the filter interface.

    State is [speed, yaw_rate, accel]; control is [unified command, steer]. The
    predicted acceleration integrates speed with a zero floor; yaw rate is held
    (its residual carries no detector weight). Measurement reorders the state
    into the wire order [accel, speed, yaw_rate].
    """

    n = 3
    p = 2
    m = 3

    def __init__(self, model: MlpModel, params: VehicleParams):
        self.model = model
        self.dt_s = params.dt_s

    def predict_state(self, x: np.ndarray, u: np.ndarray) -> np.ndarray:
        speed, yaw, accel = x
        accel_next = forward(self.model, [u[0], u[1], speed, yaw, accel])
        return np.array([max(0.0, speed + accel_next * self.dt_s), yaw, accel_next])

    def measure(self, x: np.ndarray) -> np.ndarray:
        return np.array([x[2], x[0], x[1]])


def as_process_model(model: MlpModel, params: VehicleParams) -> MlpProcessModel:
    return MlpProcessModel(model, params)


def save_model(model: MlpModel, path, seed: int = 0) -> None:
    """Write a text weight file: one 4-field header line, then one value per line."""
    dims = f"{N_INPUTS},{N_HIDDEN},{N_OUTPUTS}"
    with open(path, "w") as fh:
        fh.write(f"{MODEL_FILE_MAGIC} {MODEL_FILE_VERSION} {dims} {seed}\n")
        for param in model.params():
            for value in param.ravel():
                fh.write(repr(float(value)) + "\n")


def load_model(path) -> MlpModel:
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 4 or header[0] != MODEL_FILE_MAGIC:
            raise ValueError(f"not a model weight file: {path}")
        if int(header[1]) != MODEL_FILE_VERSION:
            raise ValueError(f"unsupported model file version {header[1]}")
        dims = tuple(int(d) for d in header[2].split(","))
        if dims != (N_INPUTS, N_HIDDEN, N_OUTPUTS):
            raise ValueError(f"unsupported layer dims {dims}")
        values = np.array([float(line) for line in fh if line.strip()])
    expected = N_HIDDEN * N_INPUTS + N_HIDDEN + N_OUTPUTS * N_HIDDEN + N_OUTPUTS
    if values.size != expected:
        raise ValueError(f"expected {expected} weights, found {values.size}")
    w1, rest = values[:N_HIDDEN * N_INPUTS], values[N_HIDDEN * N_INPUTS:]
    b1, rest = rest[:N_HIDDEN], rest[N_HIDDEN:]
    w2, b2 = rest[:N_OUTPUTS * N_HIDDEN], rest[N_OUTPUTS * N_HIDDEN:]
    return MlpModel(
        w1=w1.reshape(N_HIDDEN, N_INPUTS),
        b1=b1,
        w2=w2.reshape(N_OUTPUTS, N_HIDDEN),
        b2=b2,
    )
