"""Unscented transform, UKF predict/update, and the linear Kalman baseline.

The UKF takes any process model exposing ``predict_state`` / ``measure``; the
learned dynamics network plugs in through that interface. The baseline Kalman
filter uses the fixed-resistance longitudinal model (constant 340.5 N travel
resistance on flat road) and reports residuals through the same result type, so
the downstream detector is estimator-agnostic.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np


class CovarianceError(ValueError):
    """Covariance not usable even after jitter escalation; carries the matrix."""

    def __init__(self, message: str, matrix: np.ndarray):
        super().__init__(message)
        self.matrix = matrix


class SingularInnovationError(ValueError):
    """Innovation covariance is singular; raise the measurement-noise floor."""


@dataclass
class GaussianBelief:
    """Mean and covariance of the state estimate."""

    mean: np.ndarray
    cov: np.ndarray

    SYMMETRY_TOL = 1e-9
    EIGENVALUE_FLOOR = -1e-9

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=float)
        self.cov = np.asarray(self.cov, dtype=float)
        n = self.mean.shape[0]
        if self.cov.shape != (n, n):
            raise ValueError(f"cov shape {self.cov.shape} does not match state dim {n}")
        if np.max(np.abs(self.cov - self.cov.T)) >= self.SYMMETRY_TOL:
            raise ValueError("covariance is not symmetric")
        sym = 0.5 * (self.cov + self.cov.T)
        if np.min(np.linalg.eigvalsh(sym)) < self.EIGENVALUE_FLOOR:
            raise ValueError("covariance is not positive semi-definite")

    @property
    def dim(self) -> int:
        return self.mean.shape[0]


@dataclass(frozen=True)
class UtParams:
    """Sigma-point spread parameters; lambda = phi^2 (n + kappa) - n.

    ``kappa`` defaults to 3 - n when left unset; ``beta_prior`` folds prior
    distribution knowledge into the central covariance weight.
    """

    phi: float = 1.0
    kappa: Optional[float] = None
    beta_prior: float = 2.0

    def __post_init__(self):
        if self.phi <= 0:
            raise ValueError("phi must be positive")

    def resolved_kappa(self, n: int) -> float:
        return 3.0 - n if self.kappa is None else self.kappa

    def lam(self, n: int) -> float:
        return self.phi**2 * (n + self.resolved_kappa(n)) - n


@dataclass(frozen=True)
class SigmaSet:
    """2n+1 weighted points whose stats reproduce the source mean/covariance."""

    points: np.ndarray   # (2n+1, n)
    w_mean: np.ndarray   # (2n+1,)
    w_cov: np.ndarray    # (2n+1,)


_JITTERS = (0.0, 1e-9, 1e-8, 1e-7, 1e-6, 1e-5, 1e-4, 1e-3)


def _cholesky_with_jitter(matrix: np.ndarray) -> np.ndarray:
    sym = 0.5 * (matrix + matrix.T)
    eye = np.eye(sym.shape[0])
    for jitter in _JITTERS:
        try:
            return np.linalg.cholesky(sym + jitter * eye)
        except np.linalg.LinAlgError:
            continue
    raise CovarianceError("covariance not PSD after jitter escalation", sym)


def select_sigma_points(belief: GaussianBelief, params: UtParams) -> SigmaSet:
    """Place the central point at the mean and 2n points along +/- columns of
    the scaled covariance square root (Cholesky, with jitter escalation)."""
    n = belief.dim
    lam = params.lam(n)
    if n + lam <= 0:
        raise ValueError(f"n + lambda must be positive, got {n + lam}")
    root = _cholesky_with_jitter((n + lam) * belief.cov)

    points = np.empty((2 * n + 1, n))
    points[0] = belief.mean
    for i in range(n):
        points[1 + i] = belief.mean + root[:, i]
        points[1 + n + i] = belief.mean - root[:, i]

    w_mean = np.full(2 * n + 1, 1.0 / (2.0 * (n + lam)))
    w_cov = w_mean.copy()
    w_mean[0] = lam / (n + lam)
    w_cov[0] = lam / (n + lam) + (1.0 - params.phi**2 + params.beta_prior)
    return SigmaSet(points=points, w_mean=w_mean, w_cov=w_cov)


class ProcessModel:
    """State-transition and measurement maps the UKF propagates points through."""

    n: int  # state dimension
    p: int  # control dimension
    m: int  # measurement dimension

    def predict_state(self, x: np.ndarray, u: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def measure(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError


@dataclass
class UkfPrediction:
    """Predicted belief plus the cross statistics the update step consumes."""

    belief: GaussianBelief
    y_pred: np.ndarray
    p_yy: np.ndarray  # includes the measurement noise term
    p_xy: np.ndarray


@dataclass
class UpdateResult:
    belief: GaussianBelief
    residual: np.ndarray
    kalman_gain: np.ndarray


def _symmetrize(matrix: np.ndarray) -> np.ndarray:
    return 0.5 * (matrix + matrix.T)


def ukf_predict(belief: GaussianBelief, params: UtParams, model: ProcessModel,
                u: np.ndarray, q_proc: np.ndarray, r_meas: np.ndarray) -> UkfPrediction:
    """Propagate sigma points through the process and measurement maps.

    Returns the weighted predicted mean/covariance (plus process noise), the
    predicted measurement, its covariance (plus measurement noise) and the
    state-measurement cross covariance.
    """
    sigma = select_sigma_points(belief, params)
    n = belief.dim

    chi = np.empty_like(sigma.points)
    for i, point in enumerate(sigma.points):
        nxt = np.asarray(model.predict_state(point, u), dtype=float)
        if nxt.shape != (n,):
            raise ValueError(f"process model returned shape {nxt.shape}, expected ({n},)")
        chi[i] = nxt

    ysig = np.empty((len(chi), model.m))
    for i, point in enumerate(chi):
        y = np.asarray(model.measure(point), dtype=float)
        if y.shape != (model.m,):
            raise ValueError(f"measurement model returned shape {y.shape}, expected ({model.m},)")
        ysig[i] = y

    x_pred = sigma.w_mean @ chi
    y_pred = sigma.w_mean @ ysig
    dx = chi - x_pred
    dy = ysig - y_pred
    p_pred = (sigma.w_cov[:, None] * dx).T @ dx + np.asarray(q_proc, dtype=float)
    p_yy = (sigma.w_cov[:, None] * dy).T @ dy + np.asarray(r_meas, dtype=float)
    p_xy = (sigma.w_cov[:, None] * dx).T @ dy

    return UkfPrediction(
        belief=GaussianBelief(mean=x_pred, cov=_symmetrize(p_pred)),
        y_pred=y_pred,
        p_yy=_symmetrize(p_yy),
        p_xy=p_xy,
    )


def ukf_update(prediction: UkfPrediction, y: np.ndarray) -> UpdateResult:
    """Fold a measurement into the prediction: K = P_xy P_yy^-1, r = y - y_pred."""
    y = np.asarray(y, dtype=float)
    try:
        gain = np.linalg.solve(prediction.p_yy.T, prediction.p_xy.T).T
    except np.linalg.LinAlgError as exc:
        raise SingularInnovationError(
            "innovation covariance is singular; increase the r_meas floor"
        ) from exc
    if not np.all(np.isfinite(gain)):
        raise SingularInnovationError(
            "Kalman gain is not finite; increase the r_meas floor"
        )
    residual = y - prediction.y_pred
    mean = prediction.belief.mean + gain @ residual
    cov = _symmetrize(prediction.belief.cov - gain @ prediction.p_xy.T)
    return UpdateResult(
        belief=GaussianBelief(mean=mean, cov=cov),
        residual=residual,
        kalman_gain=gain,
    )


class UnscentedKalmanFilter:
    """Stateful wrapper running predict/update around a pluggable process model."""

    def __init__(self, model: ProcessModel, ut_params: UtParams,
                 q_proc: np.ndarray, r_meas: np.ndarray, belief: GaussianBelief):
        self.model = model
        self.ut_params = ut_params
        self.q_proc = np.asarray(q_proc, dtype=float)
        self.r_meas = np.asarray(r_meas, dtype=float)
        self.belief = belief

    def step(self, u: np.ndarray, y: np.ndarray) -> UpdateResult:
        prediction = ukf_predict(self.belief, self.ut_params, self.model,
                                 u, self.q_proc, self.r_meas)
        result = ukf_update(prediction, y)
        self.belief = result.belief
        return result


@dataclass(frozen=True)
class KfModel:
    """Constant-resistance longitudinal model: v' = v + dt (a_f - r_travel / M).

    The travel resistance is a fixed 340.5 N regardless of speed, which is the
    structural handicap of the baseline against a speed-dependent plant.
    """

    mass_kg: float = 1500.0
    r_travel_n: float = 340.5
    traction_max_mps2: float = 4.0
    dt_s: float = 0.05

    # state x = [speed, yaw_rate, accel]; measurement y = [accel, speed, yaw_rate]
    @property
    def a_matrix(self) -> np.ndarray:
        return np.array([[1.0, 0.0, 0.0],
                         [0.0, 1.0, 0.0],
                         [0.0, 0.0, 0.0]])

    @property
    def c_matrix(self) -> np.ndarray:
        return np.array([[0.0, 0.0, 1.0],
                         [1.0, 0.0, 0.0],
                         [0.0, 1.0, 0.0]])

    def control_term(self, u: np.ndarray) -> np.ndarray:
        """Affine contribution of the unified command (steer is ignored)."""
        u_unified = float(np.asarray(u, dtype=float).ravel()[0])
        a_net = self.traction_max_mps2 * (2.0 * u_unified - 1.0) - self.r_travel_n / self.mass_kg
        return np.array([self.dt_s * a_net, 0.0, a_net])


def kf_step(belief: GaussianBelief, u: np.ndarray, y: np.ndarray, kf_model: KfModel,
            q_proc: np.ndarray, r_meas: np.ndarray) -> UpdateResult:
    """One linear predict-update cycle; residual surface matches ukf_update."""
    a = kf_model.a_matrix
    c = kf_model.c_matrix
    x_pred = a @ belief.mean + kf_model.control_term(u)
    p_pred = _symmetrize(a @ belief.cov @ a.T + np.asarray(q_proc, dtype=float))

    s = _symmetrize(c @ p_pred @ c.T + np.asarray(r_meas, dtype=float))
    try:
        gain = np.linalg.solve(s.T, (p_pred @ c.T).T).T
    except np.linalg.LinAlgError as exc:
        raise SingularInnovationError(
            "innovation covariance is singular; increase the r_meas floor"
        ) from exc
    residual = np.asarray(y, dtype=float) - c @ x_pred
    mean = x_pred + gain @ residual
    eye = np.eye(belief.dim)
    cov = _symmetrize((eye - gain @ c) @ p_pred)
    return UpdateResult(
        belief=GaussianBelief(mean=mean, cov=cov),
        residual=residual,
        kalman_gain=gain,
    )


class KalmanFilterBaseline:
    """Stateful classical KF on the constant-resistance model."""

    def __init__(self, kf_model: KfModel, q_proc: np.ndarray, r_meas: np.ndarray,
                 belief: GaussianBelief):
        self.model = kf_model
        self.q_proc = np.asarray(q_proc, dtype=float)
        self.r_meas = np.asarray(r_meas, dtype=float)
        self.belief = belief

    def step(self, u: np.ndarray, y: np.ndarray) -> UpdateResult:
        result = kf_step(self.belief, u, y, self.model, self.q_proc, self.r_meas)
        self.belief = result.belief
        return result
