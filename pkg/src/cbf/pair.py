from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from geometry.primitives import ConvexPrimitive, Pose
from utils.errors import ParameterError


def planar_position_jacobian() -> np.ndarray:
    """Lift of a planar position state (x, y) into world coordinates."""
    return np.array([[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]])


class BodyPairState(BaseModel):
    """Everything the barrier of one (robot primitive, obstacle primitive) pair needs.

    ``position_jacobian`` and ``orientation_jacobian`` map robot state
    velocities to the linear and angular velocity of the robot primitive.
    """
    model_config = ConfigDict(arbitrary_types_allowed=True)

    robot_index: int = Field(default=0, ge=0)
    obstacle_index: int = Field(default=0, ge=0)
    n_robot: int = Field(default=1, ge=1)
    n_obstacles: int = Field(default=1, ge=1)

    robot_primitive: ConvexPrimitive
    robot_pose: Pose
    robot_velocity: np.ndarray = Field(default_factory=lambda: np.zeros(3))

    obstacle_primitive: ConvexPrimitive
    obstacle_pose: Pose
    obstacle_velocity: np.ndarray = Field(default_factory=lambda: np.zeros(3))
    predicted_obstacle_pose: Optional[Pose] = None
    position_covariance: Optional[np.ndarray] = None
    predicted_position_covariance: Optional[np.ndarray] = None

    position_jacobian: Optional[np.ndarray] = None
    orientation_jacobian: Optional[np.ndarray] = None

    @field_validator("robot_velocity", "obstacle_velocity", mode="before")
    @classmethod
    def _velocity(cls, v):
        v = np.asarray(v, dtype=float)
        if v.shape != (3,):
            raise ParameterError(f"Velocity must be a 3-vector, got shape {v.shape}")
        return v

    @field_validator("position_covariance", "predicted_position_covariance", mode="before")
    @classmethod
    def _covariance(cls, v):
        if v is None:
            return None
        v = np.asarray(v, dtype=float)
        if v.shape != (3, 3):
            raise ParameterError(f"Position covariance must be 3x3, got shape {v.shape}")
        return v

    @model_validator(mode="after")
    def _indices_in_range(self) -> "BodyPairState":
        if self.robot_index >= self.n_robot or self.obstacle_index >= self.n_obstacles:
            raise ParameterError(
                f"Pair ({self.robot_index}, {self.obstacle_index}) outside grid {self.n_robot}x{self.n_obstacles}"
            )
        return self

    def jacobians(self, n_state: int):
        J_v = self.position_jacobian
        if J_v is None:
            if n_state == 2:
                J_v = planar_position_jacobian()
            elif n_state == 3:
                J_v = np.eye(3)
            else:
                raise ParameterError(f"No position Jacobian for a {n_state}-dimensional state")
        J_w = self.orientation_jacobian
        if J_w is None:
            J_w = np.zeros((3, n_state))
        if J_v.shape != (3, n_state) or J_w.shape != (3, n_state):
            raise ParameterError("Segment Jacobians do not match the state dimension")
        return J_v, J_w
