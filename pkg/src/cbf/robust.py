"""Worst-case obstacle placement inside a Mahalanobis confidence region."""
from typing import NamedTuple, Optional, Tuple

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from geometry.primitives import Pose
from geometry.scaling import ScalingStatus, min_scaling, min_scaling_gradient
from utils.errors import NumericalError, ParameterError, ScalingFailure
from utils.tracer import tracer
from .config import CbfConfig
from .pair import BodyPairState

GRADIENT_FLOOR = 1e-12


class WorstCase(NamedTuple):
    position: np.ndarray
    fallback: bool


def worst_case_position(
    pair: BodyPairState,
    cfg: CbfConfig,
    h_gradient: np.ndarray,
    *,
    mean: Optional[np.ndarray] = None,
    covariance: Optional[np.ndarray] = None,
) -> WorstCase:
    """Worst-case obstacle position on the k-ellipsoid around the mean position.

    ``h_gradient`` is ∂h/∂p_o at the mean. Both steps end on the ellipsoid
    boundary:

    - ``covariance`` weighting: ``k·Σ h_r / sqrt(h_rᵀ Σ h_r)``, the minimizer
      of the linearized barrier over the ellipsoid;
    - ``gradient`` weighting: ``k·h_r / sqrt(h_rᵀ Σ⁻¹ h_r)``.

    The step is subtracted for ``descent`` and added for ``ascent``. For
    isotropic Σ, or h_r along a principal axis, the two weightings agree.
    """
    mu = pair.obstacle_pose.r if mean is None else np.asarray(mean, dtype=float)
    Sigma = pair.position_covariance if covariance is None else np.asarray(covariance, dtype=float)
    if cfg.k == 0.0:
        return WorstCase(mu.copy(), False)
    if Sigma is None:
        raise ParameterError("Noise-robust evaluation needs a position covariance")
    try:
        factor = cho_factor(Sigma)
    except np.linalg.LinAlgError as e:
        raise NumericalError(f"Position covariance is not positive definite: {e}")

    g = np.asarray(h_gradient, dtype=float)
    if np.linalg.norm(g) < GRADIENT_FLOOR:
        tracer.log_event("worst_case_fallback", {"robot_index": pair.robot_index, "obstacle_index": pair.obstacle_index})
        return WorstCase(mu.copy(), True)

    if cfg.worst_case_weighting == "covariance":
        Sg = Sigma @ g
        step = cfg.k * Sg / np.sqrt(float(g @ Sg))
    else:
        step = cfg.k * g / np.sqrt(float(g @ cho_solve(factor, g)))
    sign = -1.0 if cfg.worst_case_direction == "descent" else 1.0
    return WorstCase(mu + sign * step, False)


def robust_obstacle_pose(
    pair: BodyPairState,
    cfg: CbfConfig,
    mean_pose: Pose,
    covariance: Optional[np.ndarray],
) -> Pose:
    """Obstacle pose the noise-robust barrier is evaluated at."""
    if not cfg.noise_robust or cfg.k == 0.0:
        return mean_pose
    solution = min_scaling(pair.robot_primitive, pair.robot_pose, pair.obstacle_primitive, mean_pose)
    if solution.status in (ScalingStatus.MAX_ITER, ScalingStatus.INFEASIBLE):
        raise ScalingFailure(f"Scaling solve at the mean obstacle pose ended with {solution.status.value}")
    if solution.status == ScalingStatus.DEGENERATE:
        return mean_pose
    _, grad_obstacle = min_scaling_gradient(
        pair.robot_primitive, pair.robot_pose, pair.obstacle_primitive, mean_pose, solution,
        method=cfg.gradient_method,
    )
    worst = worst_case_position(pair, cfg, grad_obstacle.position, mean=mean_pose.r, covariance=covariance)
    return mean_pose.with_position(worst.position)


def brute_force_worst_config(
    pair: BodyPairState,
    k: float,
    covariance: np.ndarray,
    grid_resolution: int = 32,
    *,
    beta: float = 1.03,
    dims: int = 3,
    shells: int = 4,
) -> Tuple[Pose, float]:
    """Grid search for the obstacle position minimizing h inside the k-ellipsoid.

    Samples ``shells`` concentric scaled copies of the ellipsoid surface, with
    ``grid_resolution`` points per angle, in the first ``dims`` coordinates.
    """
    if grid_resolution < 16:
        raise ParameterError("Brute-force search needs at least 16 samples per angle")
    if dims not in (2, 3):
        raise ParameterError("Brute-force search runs in 2 or 3 dimensions")
    mu = pair.obstacle_pose.r
    L = np.linalg.cholesky(np.asarray(covariance, dtype=float)[:dims, :dims])

    if dims == 2:
        angles = np.linspace(0.0, 2 * np.pi, grid_resolution, endpoint=False)
        directions = np.stack([np.cos(angles), np.sin(angles)], axis=1)
    else:
        azimuth = np.linspace(0.0, 2 * np.pi, grid_resolution, endpoint=False)
        polar = np.linspace(0.0, np.pi, grid_resolution)
        A, P = np.meshgrid(azimuth, polar)
        directions = np.stack([np.sin(P) * np.cos(A), np.sin(P) * np.sin(A), np.cos(P)], axis=-1).reshape(-1, dims)

    candidates = [mu.copy()]
    for fraction in np.linspace(1.0 / shells, 1.0, shells):
        for u in directions:
            p = mu.copy()
            p[:dims] += k * fraction * (L @ u)
            candidates.append(p)

    best_pose, best_h = pair.obstacle_pose, np.inf
    for p in candidates:
        pose = pair.obstacle_pose.with_position(p)
        solution = min_scaling(pair.robot_primitive, pair.robot_pose, pair.obstacle_primitive, pose)
        h = solution.alpha_star - beta if solution.ok else -np.inf
        if h < best_h:
            best_pose, best_h = pose, h
    return best_pose, float(best_h)
