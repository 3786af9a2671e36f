import numpy as np
from pydantic import BaseModel, ConfigDict, PositiveFloat, field_validator

from geometry.primitives import Pose
from utils import rotations
from utils.errors import NumericalError, ParameterError

STATE_DIM = 12
POSITION = slice(0, 3)
VELOCITY = slice(3, 6)
ORIENTATION = slice(6, 9)
ANGULAR_VELOCITY = slice(9, 12)


def _vector3(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.shape != (3,) or not np.all(np.isfinite(v)):
        raise ParameterError(f"Expected a finite 3-vector, got {v!r}")
    return v


class GaussianBelief(BaseModel):
    """Obstacle state estimate.

    The mean is (position, velocity, quaternion, angular velocity); the
    covariance is over the 12-dimensional error state
    (δp, δv, δθ, δω), with δθ a body-frame rotation vector.
    """
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    position: np.ndarray
    velocity: np.ndarray
    quaternion: np.ndarray
    angular_velocity: np.ndarray
    covariance: np.ndarray

    @field_validator("position", "velocity", "angular_velocity", mode="before")
    @classmethod
    def _check_vector(cls, v):
        return _vector3(v)

    @field_validator("quaternion", mode="before")
    @classmethod
    def _check_quaternion(cls, v):
        return rotations.canonical(v)

    @field_validator("covariance", mode="before")
    @classmethod
    def _check_covariance(cls, v):
        P = np.asarray(v, dtype=float)
        if P.shape != (STATE_DIM, STATE_DIM) or not np.all(np.isfinite(P)):
            raise ParameterError(f"Covariance must be a finite {STATE_DIM}x{STATE_DIM} matrix")
        P = 0.5 * (P + P.T)
        if np.min(np.linalg.eigvalsh(P)) < -1e-9 * max(1.0, float(np.max(np.abs(P)))):
            raise NumericalError("Covariance is not positive semidefinite")
        return P

    @property
    def position_covariance(self) -> np.ndarray:
        return self.covariance[POSITION, POSITION]

    @property
    def pose(self) -> Pose:
        return Pose.from_arrays(self.position, self.quaternion)


class PoseMeasurement(BaseModel):
    """Noisy pose observation; ``noise`` is over (δp, δθ)."""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    position: np.ndarray
    quaternion: np.ndarray
    noise: np.ndarray

    @field_validator("position", mode="before")
    @classmethod
    def _check_position(cls, v):
        return _vector3(v)

    @field_validator("quaternion", mode="before")
    @classmethod
    def _check_quaternion(cls, v):
        return rotations.canonical(v)

    @field_validator("noise", mode="before")
    @classmethod
    def _check_noise(cls, v):
        R = np.asarray(v, dtype=float)
        if R.shape != (6, 6):
            raise ParameterError("Measurement noise must be 6x6")
        R = 0.5 * (R + R.T)
        try:
            np.linalg.cholesky(R)
        except np.linalg.LinAlgError as e:
            raise NumericalError(f"Measurement noise is not positive definite: {e}")
        return R


class EkfSettings(BaseModel):
    """Tuning of the constant-velocity filter."""

    acceleration_density: PositiveFloat = 1.0
    angular_acceleration_density: PositiveFloat = 0.1
    initial_velocity_variance: PositiveFloat = 100.0
    initial_angular_velocity_variance: PositiveFloat = 1.0
