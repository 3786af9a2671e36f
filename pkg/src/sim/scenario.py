from typing import List, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, Field, NonNegativeFloat, PositiveFloat, field_validator, model_validator

from control.factory import ControllerSpec
from estimation.belief import EkfSettings
from geometry.primitives import Capsule, ConvexPrimitive, Pose, Vector3
from utils import rotations
from utils.errors import ParameterError


class VelocitySegment(BaseModel):
    """Constant linear (world) and angular (body) velocity from ``start_time`` on."""

    start_time: NonNegativeFloat = 0.0
    velocity: Vector3 = (0.0, 0.0, 0.0)
    angular_velocity: Vector3 = (0.0, 0.0, 0.0)


class ObstacleScript(BaseModel):
    name: str = "obstacle"
    primitive: ConvexPrimitive
    initial_pose: Pose
    profile: List[VelocitySegment] = Field(default_factory=lambda: [VelocitySegment()])

    @field_validator("profile")
    @classmethod
    def _ordered_profile(cls, profile: List[VelocitySegment]) -> List[VelocitySegment]:
        if not profile or profile[0].start_time != 0.0:
            raise ParameterError("Velocity profile must start at t = 0")
        starts = [seg.start_time for seg in profile]
        if any(b <= a for a, b in zip(starts, starts[1:])):
            raise ParameterError("Velocity profile start times must increase")
        return profile

    def _spans(self, t: float):
        for i, seg in enumerate(self.profile):
            end = self.profile[i + 1].start_time if i + 1 < len(self.profile) else np.inf
            if t <= seg.start_time:
                break
            yield seg, min(t, end) - seg.start_time

    def segment_at(self, t: float) -> VelocitySegment:
        current = self.profile[0]
        for seg in self.profile:
            if seg.start_time <= t:
                current = seg
        return current

    def pose_at(self, t: float) -> Pose:
        position = self.initial_pose.r.copy()
        q = self.initial_pose.q
        for seg, span in self._spans(t):
            position = position + np.asarray(seg.velocity) * span
            if any(seg.angular_velocity):
                q = rotations.multiply(q, rotations.exp(np.asarray(seg.angular_velocity) * span))
        return Pose.from_arrays(position, q)

    def velocity_at(self, t: float) -> np.ndarray:
        return np.asarray(self.segment_at(t).velocity, dtype=float)

    def angular_velocity_at(self, t: float) -> np.ndarray:
        return np.asarray(self.segment_at(t).angular_velocity, dtype=float)


class RobotSpec(BaseModel):
    """Robot geometry and kinematics.

    ``planar_integrator``: one primitive at (x, y, 0), state (x, y).
    ``planar_arm``: revolute chain in the xy-plane, one capsule per link,
    state = joint angles.

    The actuator tracks the command through a first-order lag
    (``actuator_time_constant``, 0 = instant) and saturates every coordinate
    at ``velocity_limit``. The controller is not told about either.
    """

    kind: Literal["planar_integrator", "planar_arm"] = "planar_integrator"
    primitives: List[ConvexPrimitive]
    initial_state: Tuple[float, ...]
    link_lengths: Tuple[PositiveFloat, ...] = ()
    base: Vector3 = (0.0, 0.0, 0.0)
    velocity_limit: Optional[PositiveFloat] = None
    actuator_time_constant: NonNegativeFloat = 0.0

    @model_validator(mode="after")
    def _consistent(self) -> "RobotSpec":
        if self.kind == "planar_integrator":
            if len(self.primitives) != 1 or len(self.initial_state) != 2:
                raise ParameterError("Planar integrator has one primitive and a 2-dimensional state")
        else:
            n = len(self.link_lengths)
            if n == 0 or len(self.primitives) != n or len(self.initial_state) != n:
                raise ParameterError("Planar arm needs one capsule and one joint angle per link")
            for prim, length in zip(self.primitives, self.link_lengths):
                if not isinstance(prim, Capsule) or abs(prim.length - length) > 1e-12:
                    raise ParameterError("Arm links must be capsules with the link length")
        return self

    @property
    def n_inputs(self) -> int:
        return len(self.initial_state)


class NoiseSpec(BaseModel):
    """Additive Gaussian measurement noise; variances per axis.

    ``measurement_period`` is the sensor interval in seconds (``None``: every
    tick); between measurements the filter extrapolates.
    """

    position_variance: PositiveFloat = 0.5
    orientation_variance: NonNegativeFloat = 0.0
    planar: bool = False
    measurement_period: Optional[PositiveFloat] = None
    ekf: EkfSettings = EkfSettings()

    def measurement_noise(self) -> np.ndarray:
        # floor keeps R invertible when orientation is measured exactly
        rot = max(self.orientation_variance, 1e-8)
        return np.diag([self.position_variance] * 3 + [rot] * 3)


class Scenario(BaseModel):
    name: str
    description: str = ""
    robot: RobotSpec
    obstacles: List[ObstacleScript]
    controller: ControllerSpec
    noise: Optional[NoiseSpec] = None
    target: Optional[Vector3] = None
    target_tolerance: PositiveFloat = 0.1
    dt: PositiveFloat = 0.01
    duration: NonNegativeFloat
    seed: int = 0

    @model_validator(mode="after")
    def _controller_matches_robot(self) -> "Scenario":
        if self.controller.box.dims != self.robot.n_inputs:
            raise ParameterError(
                f"Control box has {self.controller.box.dims} inputs, robot has {self.robot.n_inputs}"
            )
        if self.controller.kind == "mpc" and (self.robot.kind != "planar_integrator" or self.target is None):
            raise ParameterError("MPC baseline needs a planar integrator robot and a target")
        return self

    @property
    def steps(self) -> int:
        return int(round(self.duration / self.dt))

    def with_controller(self, kind: str) -> "Scenario":
        data = self.model_dump()
        data["controller"]["kind"] = kind
        return Scenario.model_validate(data)

    def with_overrides(self, **overrides) -> "Scenario":
        """Validated copy with top-level and barrier overrides (``None`` skips a field)."""
        data = self.model_dump()
        for key in ("dt", "duration", "seed"):
            if overrides.get(key) is not None:
                data[key] = overrides[key]
        cbf_fields = {k: v for k, v in overrides.items() if k not in ("dt", "duration", "seed") and v is not None}
        data["controller"]["cbf"].update(cbf_fields)
        return Scenario.model_validate(data)
