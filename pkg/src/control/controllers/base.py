from abc import ABC, abstractmethod
from typing import List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from cbf.barrier import ConstraintRow
from geometry.primitives import ConvexPrimitive, Pose


class RobotSegment(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    index: int
    primitive: ConvexPrimitive
    pose: Pose
    velocity: np.ndarray
    position_jacobian: np.ndarray
    orientation_jacobian: np.ndarray


class ObstacleEstimate(BaseModel):
    """What the controller knows about one obstacle at time t."""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    index: int
    primitive: ConvexPrimitive
    pose: Pose
    velocity: np.ndarray
    predicted_pose: Pose
    position_covariance: Optional[np.ndarray] = None
    predicted_position_covariance: Optional[np.ndarray] = None


class ControlContext(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    t: float
    state: np.ndarray
    position: np.ndarray
    segments: List[RobotSegment]
    obstacles: List[ObstacleEstimate]
    u_ref: np.ndarray
    drift: np.ndarray
    actuation: np.ndarray
    target: Optional[np.ndarray] = None


class ControlOutput(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    u: np.ndarray
    status: str
    solve_time: float = 0.0
    rows: Tuple[ConstraintRow, ...] = Field(default_factory=tuple)
    pruned: int = 0
    fallback: bool = False


class Controller(ABC):
    """A control law mapping the current context to a command."""

    @abstractmethod
    def compute(self, context: ControlContext) -> ControlOutput:
        """
        Produces the command for one tick.

        Args:
            context: robot state, segment kinematics, obstacle estimates and
                the nominal reference.

        Returns:
            The command with its solver status and timing.
        """
        pass

    def reset(self):
        """Drops any state carried between ticks."""
