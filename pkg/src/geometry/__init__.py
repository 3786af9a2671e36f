from .primitives import Capsule, ConvexPrimitive, Polytope, Pose, Sphere
from .scaling import (
    PoseGradient,
    ScalingSolution,
    ScalingStatus,
    min_scaling,
    min_scaling_batch,
    min_scaling_gradient,
    scaled_set_contains,
)
from .distance import oracle_distance

__all__ = [
    "Capsule",
    "ConvexPrimitive",
    "Polytope",
    "Pose",
    "PoseGradient",
    "ScalingSolution",
    "ScalingStatus",
    "Sphere",
    "min_scaling",
    "min_scaling_batch",
    "min_scaling_gradient",
    "oracle_distance",
    "scaled_set_contains",
]
