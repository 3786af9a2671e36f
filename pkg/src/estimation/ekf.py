"""Constant-velocity extended Kalman filter for obstacle poses."""
from typing import Optional, Tuple

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.spatial.transform import Rotation
from scipy.stats import chi2

from geometry.primitives import Pose
from utils import rotations
from utils.errors import NumericalError, ParameterError
from .belief import (
    ANGULAR_VELOCITY,
    ORIENTATION,
    POSITION,
    STATE_DIM,
    VELOCITY,
    EkfSettings,
    GaussianBelief,
    PoseMeasurement,
)

_H = np.zeros((6, STATE_DIM))
_H[0:3, POSITION] = np.eye(3)
_H[3:6, ORIENTATION] = np.eye(3)


def _factor(S: np.ndarray, what: str):
    try:
        return cho_factor(S)
    except np.linalg.LinAlgError as e:
        raise NumericalError(f"{what} is not positive definite: {e}")


def constant_velocity_process_noise(
    dt: float,
    acceleration_density: float = 1.0,
    angular_acceleration_density: float = 0.1,
) -> np.ndarray:
    """Discrete white-acceleration noise for the (δp, δv, δθ, δω) error state."""
    if dt <= 0.0:
        raise ParameterError(f"Time step must be positive, got {dt}")
    block = np.kron(np.array([[dt ** 3 / 3.0, dt ** 2 / 2.0], [dt ** 2 / 2.0, dt]]), np.eye(3))
    Q = np.zeros((STATE_DIM, STATE_DIM))
    Q[0:6, 0:6] = acceleration_density * block
    Q[6:12, 6:12] = angular_acceleration_density * block
    return Q


def ekf_predict(belief: GaussianBelief, dt: float, process_noise: np.ndarray) -> GaussianBelief:
    if dt <= 0.0:
        raise ParameterError(f"Time step must be positive, got {dt}")
    Q = np.asarray(process_noise, dtype=float)
    if Q.shape != (STATE_DIM, STATE_DIM):
        raise ParameterError(f"Process noise must be {STATE_DIM}x{STATE_DIM}")

    step = belief.angular_velocity * dt
    F = np.eye(STATE_DIM)
    F[POSITION, VELOCITY] = dt * np.eye(3)
    F[ORIENTATION, ORIENTATION] = Rotation.from_rotvec(step).as_matrix().T
    F[ORIENTATION, ANGULAR_VELOCITY] = dt * np.eye(3)

    return GaussianBelief(
        position=belief.position + belief.velocity * dt,
        velocity=belief.velocity,
        quaternion=rotations.multiply(belief.quaternion, rotations.exp(step)),
        angular_velocity=belief.angular_velocity,
        covariance=F @ belief.covariance @ F.T + Q,
    )


def ekf_update(belief: GaussianBelief, z: PoseMeasurement) -> GaussianBelief:
    """Fuse one pose measurement (Joseph-form covariance update)."""
    P = belief.covariance
    innovation = np.concatenate([
        z.position - belief.position,
        rotations.right_difference(belief.quaternion, z.quaternion),
    ])
    S = _H @ P @ _H.T + z.noise
    factor = _factor(S, "Innovation covariance")
    K = cho_solve(factor, _H @ P).T
    dx = K @ innovation

    I_KH = np.eye(STATE_DIM) - K @ _H
    covariance = I_KH @ P @ I_KH.T + K @ z.noise @ K.T

    return GaussianBelief(
        position=belief.position + dx[POSITION],
        velocity=belief.velocity + dx[VELOCITY],
        quaternion=rotations.multiply(belief.quaternion, rotations.exp(dx[ORIENTATION])),
        angular_velocity=belief.angular_velocity + dx[ANGULAR_VELOCITY],
        covariance=covariance,
    )


def mahalanobis(y, mean, covariance) -> float:
    d = np.atleast_1d(np.asarray(y, dtype=float) - np.asarray(mean, dtype=float))
    S = np.atleast_2d(np.asarray(covariance, dtype=float))
    if S.shape != (d.size, d.size):
        raise ParameterError(f"Covariance shape {S.shape} does not match vector of size {d.size}")
    factor = _factor(S, "Covariance")
    return float(np.sqrt(d @ cho_solve(factor, d)))


def confidence_probability(k: float, dims: int = 3) -> float:
    """Probability mass of a Gaussian inside Mahalanobis radius ``k``."""
    if k < 0.0:
        raise ParameterError(f"Confidence radius must be non-negative, got {k}")
    return float(chi2.cdf(k * k, dims))


def initialize_belief(z: PoseMeasurement, settings: Optional[EkfSettings] = None) -> GaussianBelief:
    settings = settings or EkfSettings()
    P = np.zeros((STATE_DIM, STATE_DIM))
    P[POSITION, POSITION] = z.noise[0:3, 0:3]
    P[VELOCITY, VELOCITY] = settings.initial_velocity_variance * np.eye(3)
    P[ORIENTATION, ORIENTATION] = z.noise[3:6, 3:6]
    P[ANGULAR_VELOCITY, ANGULAR_VELOCITY] = settings.initial_angular_velocity_variance * np.eye(3)
    return GaussianBelief(
        position=z.position,
        velocity=np.zeros(3),
        quaternion=z.quaternion,
        angular_velocity=np.zeros(3),
        covariance=P,
    )


def predicted_configuration(
    belief: GaussianBelief,
    horizon: float,
    settings: Optional[EkfSettings] = None,
) -> Tuple[Pose, np.ndarray]:
    """Mean pose and position covariance ``horizon`` seconds ahead."""
    if horizon < 0.0:
        raise ParameterError(f"Prediction horizon must be non-negative, got {horizon}")
    if horizon == 0.0:
        return belief.pose, belief.position_covariance
    settings = settings or EkfSettings()
    Q = constant_velocity_process_noise(horizon, settings.acceleration_density, settings.angular_acceleration_density)
    ahead = ekf_predict(belief, horizon, Q)
    return ahead.pose, ahead.position_covariance


class ObstacleTracker:
    """One filter instance per obstacle, fed with timestamped measurements."""

    def __init__(self, settings: Optional[EkfSettings] = None):
        self.settings = settings or EkfSettings()
        self.belief: Optional[GaussianBelief] = None
        self.last_time: Optional[float] = None

    def observe(self, z: PoseMeasurement, t: float) -> GaussianBelief:
        if self.belief is None:
            self.belief = initialize_belief(z, self.settings)
        else:
            dt = t - self.last_time
            if dt < 0.0:
                raise ParameterError(f"Measurement at t={t} is older than the last one at t={self.last_time}")
            if dt > 0.0:
                Q = constant_velocity_process_noise(
                    dt, self.settings.acceleration_density, self.settings.angular_acceleration_density
                )
                self.belief = ekf_predict(self.belief, dt, Q)
            self.belief = ekf_update(self.belief, z)
        self.last_time = t
        return self.belief

    def predict(self, horizon: float) -> Tuple[Pose, np.ndarray]:
        if self.belief is None:
            raise ParameterError("Tracker has no measurement yet")
        return predicted_configuration(self.belief, horizon, self.settings)
