"""Independent distance oracle (GJK on core shapes plus margins).

Each primitive is split into a core (point, segment or vertex hull) and a
spherical margin. GJK runs on the Minkowski difference of the cores; the
returned distance is the core distance minus both margins, so it is exact for
separated bodies and non-positive when they touch or overlap.
"""
from itertools import combinations
from typing import List, Tuple

import numpy as np

from .primitives import ConvexPrimitive, Pose


def _world_support(prim: ConvexPrimitive, pose: Pose, direction: np.ndarray) -> np.ndarray:
    return pose.r + pose.R @ prim.core_support(pose.R.T @ direction)


def _closest_on_simplex(points: List[np.ndarray]) -> Tuple[np.ndarray, List[np.ndarray]]:
    best_point = None
    best_subset: List[np.ndarray] = []
    best_norm = np.inf
    n = len(points)
    for size in range(1, n + 1):
        for subset in combinations(range(n), size):
            P = np.array([points[i] for i in subset])
            if size == 1:
                weights = np.ones(1)
            else:
                # min ‖Pᵀλ‖² s.t. Σλ = 1
                K = np.zeros((size + 1, size + 1))
                K[:size, :size] = P @ P.T
                K[:size, size] = 1.0
                K[size, :size] = 1.0
                rhs = np.zeros(size + 1)
                rhs[size] = 1.0
                weights = np.linalg.lstsq(K, rhs, rcond=None)[0][:size]
                if np.any(weights < -1e-12):
                    continue
            point = weights @ P
            norm = float(np.linalg.norm(point))
            if norm < best_norm - 1e-15:
                best_norm = norm
                best_point = point
                best_subset = [points[i] for i, w in zip(subset, weights) if w > 1e-12] or [points[subset[0]]]
    return best_point, best_subset


def oracle_distance(
    prim_a: ConvexPrimitive,
    pose_a: Pose,
    prim_b: ConvexPrimitive,
    pose_b: Pose,
    *,
    max_iterations: int = 64,
    tol: float = 1e-12,
) -> float:
    """Separation distance between two placed primitives (≤ 0 on contact)."""

    def support(direction: np.ndarray) -> np.ndarray:
        return _world_support(prim_a, pose_a, direction) - _world_support(prim_b, pose_b, -direction)

    initial = pose_a.r - pose_b.r
    if np.linalg.norm(initial) < 1e-12:
        initial = np.array([1.0, 0.0, 0.0])
    v = support(-initial)
    simplex = [v]

    for _ in range(max_iterations):
        v_norm_sq = float(v @ v)
        if v_norm_sq < tol:
            v = np.zeros(3)
            break
        w = support(-v)
        if v_norm_sq - float(v @ w) <= tol * max(1.0, v_norm_sq):
            break
        simplex.append(w)
        v, simplex = _closest_on_simplex(simplex)
        if len(simplex) == 4:
            v = np.zeros(3)
            break

    return float(np.linalg.norm(v)) - (prim_a.margin + prim_b.margin)
