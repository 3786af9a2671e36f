"""Kinematic robot models: state → primitive poses and their Jacobians."""
from abc import ABC, abstractmethod
from typing import List, Tuple

import numpy as np

from geometry.primitives import Pose
from utils import rotations
from .scenario import RobotSpec

Z_AXIS = np.array([0.0, 0.0, 1.0])
# capsule axis (body z) onto the link direction (body x of the joint frame)
_LINK_ALIGNMENT = rotations.exp([0.0, np.pi / 2.0, 0.0])


class RobotModel(ABC):
    """Velocity-controlled robot: ẋ = F(x) + G(x)·u with F = 0, G = I."""

    def __init__(self, spec: RobotSpec):
        self.spec = spec
        self.primitives = spec.primitives

    @property
    def n_state(self) -> int:
        return len(self.spec.initial_state)

    def drift(self, x: np.ndarray) -> np.ndarray:
        return np.zeros(self.n_state)

    def actuation(self, x: np.ndarray) -> np.ndarray:
        return np.eye(self.n_state)

    def step(self, x: np.ndarray, u: np.ndarray, dt: float) -> np.ndarray:
        return x + dt * (self.drift(x) + self.actuation(x) @ u)

    @abstractmethod
    def segment_poses(self, x: np.ndarray) -> List[Pose]:
        pass

    @abstractmethod
    def segment_jacobians(self, x: np.ndarray) -> List[Tuple[np.ndarray, np.ndarray]]:
        """(J_v, J_ω) per segment, each 3 × n_state."""
        pass

    @abstractmethod
    def position(self, x: np.ndarray) -> np.ndarray:
        """Point tracked by references and metrics."""
        pass


class PlanarIntegrator(RobotModel):
    def segment_poses(self, x):
        return [Pose.from_arrays([x[0], x[1], 0.0])]

    def segment_jacobians(self, x):
        J_v = np.zeros((3, 2))
        J_v[:2, :2] = np.eye(2)
        return [(J_v, np.zeros((3, 2)))]

    def position(self, x):
        return np.asarray(x, dtype=float).copy()


class PlanarArm(RobotModel):
    """Revolute chain rotating about world z; segment origins at link midpoints."""

    def __init__(self, spec: RobotSpec):
        super().__init__(spec)
        self.lengths = np.asarray(spec.link_lengths, dtype=float)
        self.base = np.asarray(spec.base, dtype=float)

    def _joints(self, x):
        angles = np.cumsum(x)
        joints = [self.base.copy()]
        for length, theta in zip(self.lengths, angles):
            joints.append(joints[-1] + length * np.array([np.cos(theta), np.sin(theta), 0.0]))
        return angles, joints

    def segment_poses(self, x):
        angles, joints = self._joints(x)
        poses = []
        for i, theta in enumerate(angles):
            midpoint = 0.5 * (joints[i] + joints[i + 1])
            poses.append(Pose.from_arrays(midpoint, rotations.multiply(rotations.about_z(theta), _LINK_ALIGNMENT)))
        return poses

    def segment_jacobians(self, x):
        _, joints = self._joints(x)
        n = self.n_state
        result = []
        for i in range(n):
            midpoint = 0.5 * (joints[i] + joints[i + 1])
            J_v = np.zeros((3, n))
            J_w = np.zeros((3, n))
            for k in range(i + 1):
                J_v[:, k] = np.cross(Z_AXIS, midpoint - joints[k])
                J_w[:, k] = Z_AXIS
            result.append((J_v, J_w))
        return result

    def position(self, x):
        return self._joints(x)[1][-1]


def build_robot(spec: RobotSpec) -> RobotModel:
    if spec.kind == "planar_integrator":
        return PlanarIntegrator(spec)
    elif spec.kind == "planar_arm":
        return PlanarArm(spec)
    else:
        raise ValueError(f"Unknown robot kind: {spec.kind}")
