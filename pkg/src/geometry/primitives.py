from functools import cached_property
from typing import Annotated, Any, List, Literal, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, PositiveFloat, NonNegativeFloat, field_validator, model_validator
from scipy.optimize import linprog
from scipy.spatial import HalfspaceIntersection

from utils import rotations
from utils.errors import ParameterError

Vector3 = Tuple[float, float, float]


class Sphere(BaseModel):
    """Ball of ``radius`` centered on the body origin."""
    model_config = ConfigDict(frozen=True)

    kind: Literal["sphere"] = "sphere"
    radius: PositiveFloat

    @property
    def margin(self) -> float:
        return self.radius

    def bounding_radius(self) -> float:
        return self.radius

    def inradius(self) -> float:
        return self.radius

    def core_support(self, direction: np.ndarray) -> np.ndarray:
        return np.zeros(3)

    def contains_scaled(self, y: np.ndarray, alpha: float, tol: float) -> bool:
        return float(np.linalg.norm(y)) <= alpha * self.radius + tol


class Capsule(BaseModel):
    """Segment of length ``length`` along the body z-axis, swept by a ball of ``radius``."""
    model_config = ConfigDict(frozen=True)

    kind: Literal["capsule"] = "capsule"
    length: NonNegativeFloat
    radius: PositiveFloat

    @property
    def half_length(self) -> float:
        return 0.5 * self.length

    @property
    def margin(self) -> float:
        return self.radius

    def bounding_radius(self) -> float:
        return self.half_length + self.radius

    def inradius(self) -> float:
        return self.radius

    def core_support(self, direction: np.ndarray) -> np.ndarray:
        sign = 1.0 if direction[2] >= 0.0 else -1.0
        return np.array([0.0, 0.0, sign * self.half_length])

    def contains_scaled(self, y: np.ndarray, alpha: float, tol: float) -> bool:
        reach = alpha * self.half_length
        s = float(np.clip(y[2], -reach, reach))
        offset = y - np.array([0.0, 0.0, s])
        return float(np.linalg.norm(offset)) <= alpha * self.radius + tol


class Polytope(BaseModel):
    """Bounded polytope ``{y : normals·y <= offsets}`` in body coordinates.

    Rows are normalized to unit normals on construction; every offset must be
    positive so the body origin is strictly interior.
    """
    model_config = ConfigDict(frozen=True)

    kind: Literal["polytope"] = "polytope"
    normals: List[Vector3] = Field(min_length=4)
    offsets: List[float]

    @model_validator(mode="before")
    @classmethod
    def _normalize_rows(cls, data: Any) -> Any:
        if not isinstance(data, dict) or "normals" not in data or "offsets" not in data:
            return data
        A = np.asarray(data["normals"], dtype=float)
        b = np.asarray(data["offsets"], dtype=float)
        if A.ndim != 2 or A.shape[1] != 3 or b.shape != (A.shape[0],):
            raise ParameterError("Polytope needs an (m, 3) normal matrix and m offsets")
        norms = np.linalg.norm(A, axis=1)
        if np.any(norms < 1e-12):
            raise ParameterError("Polytope has a zero normal row")
        return {**data, "normals": [tuple(row) for row in A / norms[:, None]], "offsets": list(b / norms)}

    @model_validator(mode="after")
    def _check_origin_and_bounds(self) -> "Polytope":
        if np.any(self.b <= 0.0):
            raise ParameterError("Polytope body origin must be strictly interior (all offsets > 0)")
        for axis in range(3):
            for sign in (1.0, -1.0):
                direction = np.zeros(3)
                direction[axis] = sign
                res = linprog(-direction, A_ub=self.A, b_ub=self.b, bounds=[(None, None)] * 3, method="highs")
                if res.status == 3:
                    raise ParameterError("Polytope is unbounded")
        return self

    @classmethod
    def box(cls, size: Vector3) -> "Polytope":
        half = 0.5 * np.asarray(size, dtype=float)
        if np.any(half <= 0.0):
            raise ParameterError(f"Box size must be positive, got {size}")
        normals = np.vstack([np.eye(3), -np.eye(3)])
        return cls(normals=normals.tolist(), offsets=np.concatenate([half, half]).tolist())

    @cached_property
    def A(self) -> np.ndarray:
        return np.asarray(self.normals, dtype=float)

    @cached_property
    def b(self) -> np.ndarray:
        return np.asarray(self.offsets, dtype=float)

    @cached_property
    def vertices(self) -> np.ndarray:
        halfspaces = np.hstack([self.A, -self.b[:, None]])
        hs = HalfspaceIntersection(halfspaces, np.zeros(3))
        return hs.intersections

    @property
    def margin(self) -> float:
        return 0.0

    def bounding_radius(self) -> float:
        return float(np.max(np.linalg.norm(self.vertices, axis=1)))

    def inradius(self) -> float:
        """Radius of the largest ball about the body origin (unit normals)."""
        return float(np.min(self.b))

    def core_support(self, direction: np.ndarray) -> np.ndarray:
        return self.vertices[int(np.argmax(self.vertices @ direction))]

    def contains_scaled(self, y: np.ndarray, alpha: float, tol: float) -> bool:
        return bool(np.max(self.A @ y - alpha * self.b) <= tol)


ConvexPrimitive = Annotated[Union[Sphere, Polytope, Capsule], Field(discriminator="kind")]


class Pose(BaseModel):
    """Rigid placement: world position ``r`` and unit quaternion (scalar-last)."""
    model_config = ConfigDict(frozen=True)

    position: Vector3 = (0.0, 0.0, 0.0)
    quaternion: Tuple[float, float, float, float] = (0.0, 0.0, 0.0, 1.0)

    @field_validator("position")
    @classmethod
    def _finite_position(cls, v: Vector3) -> Vector3:
        if not np.all(np.isfinite(v)):
            raise ParameterError(f"Pose position must be finite, got {v}")
        return tuple(float(c) for c in v)

    @field_validator("quaternion")
    @classmethod
    def _unit_quaternion(cls, v) -> Tuple[float, float, float, float]:
        norm = float(np.linalg.norm(v))
        if not np.isfinite(norm) or abs(norm - 1.0) > 1e-6:
            raise ParameterError(f"Pose quaternion must have unit norm, got norm {norm}")
        return tuple(float(c) for c in rotations.canonical(v))

    @classmethod
    def from_arrays(cls, position, quaternion=None) -> "Pose":
        q = rotations.IDENTITY_QUATERNION if quaternion is None else quaternion
        return cls(position=tuple(np.asarray(position, dtype=float)), quaternion=tuple(rotations.canonical(q)))

    @classmethod
    def planar(cls, x: float, y: float, theta: float = 0.0) -> "Pose":
        return cls.from_arrays([x, y, 0.0], rotations.about_z(theta))

    @cached_property
    def r(self) -> np.ndarray:
        return np.asarray(self.position, dtype=float)

    @cached_property
    def q(self) -> np.ndarray:
        return np.asarray(self.quaternion, dtype=float)

    @cached_property
    def R(self) -> np.ndarray:
        return rotations.matrix(self.q)

    def translated(self, delta) -> "Pose":
        return Pose.from_arrays(self.r + np.asarray(delta, dtype=float), self.q)

    def rotated(self, delta) -> "Pose":
        """Left (world-frame) rotation by the rotation vector ``delta``."""
        return Pose.from_arrays(self.r, rotations.rotate_left(self.q, delta))

    def with_position(self, position) -> "Pose":
        return Pose.from_arrays(position, self.q)

    def to_body(self, point: np.ndarray) -> np.ndarray:
        return self.R.T @ (np.asarray(point, dtype=float) - self.r)
