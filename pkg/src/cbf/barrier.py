"""Time-varying barrier values, time partials and QP constraint rows."""
from typing import List, Literal, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict

from geometry.primitives import Pose
from geometry.scaling import ScalingSolution, ScalingStatus, min_scaling_batch, min_scaling_gradient
from utils import rotations
from utils.errors import ParameterError, ScalingFailure
from utils.tracer import tracer
from .config import CbfConfig
from .pair import BodyPairState
from .robust import robust_obstacle_pose

Mode = Literal["plain", "inflated"]


class ConstraintRow(BaseModel):
    """One affine control constraint ``a·u >= c`` with its provenance."""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    a: np.ndarray
    c: float
    robot_index: int
    obstacle_index: int
    h: float
    dhdt: float
    alpha_star: float
    mode: Mode = "plain"
    emergency: bool = False


class _Evaluation(NamedTuple):
    solution: ScalingSolution
    obstacle_pose: Pose
    plain: float
    inflated: float
    projection: float

    def value(self, mode: Mode) -> float:
        return self.inflated if mode == "inflated" else self.plain


def _check(pair: BodyPairState, solution: ScalingSolution) -> ScalingSolution:
    if solution.status in (ScalingStatus.MAX_ITER, ScalingStatus.INFEASIBLE):
        raise ScalingFailure(
            f"Scaling solve for pair ({pair.robot_index}, {pair.obstacle_index}) ended with {solution.status.value}"
        )
    return solution


def _mean_configuration(pair: BodyPairState, ahead: bool) -> Tuple[Pose, Optional[np.ndarray]]:
    if not ahead:
        return pair.obstacle_pose, pair.position_covariance
    if pair.predicted_obstacle_pose is None:
        raise ParameterError("Time partial needs the predicted obstacle pose ψ(t+Δt)")
    covariance = pair.predicted_position_covariance
    if covariance is None:
        covariance = pair.position_covariance
    return pair.predicted_obstacle_pose, covariance


def _projected_velocity(pair: BodyPairState, obstacle_position: np.ndarray) -> float:
    # a_v = (v_o - v_r)ᵀ (p_r - p_o)
    return float((pair.obstacle_velocity - pair.robot_velocity) @ (pair.robot_pose.r - obstacle_position))


def _evaluation(pair: BodyPairState, cfg: CbfConfig, obstacle_pose: Pose, solution: ScalingSolution) -> _Evaluation:
    if solution.status == ScalingStatus.DEGENERATE:
        return _Evaluation(solution, obstacle_pose, -np.inf, -np.inf, 0.0)
    projection = _projected_velocity(pair, obstacle_pose.r)
    plain = solution.alpha_star - cfg.beta
    inflated = (1.0 + cfg.b) * projection * solution.alpha_star - cfg.beta
    return _Evaluation(solution, obstacle_pose, plain, inflated, projection)


def _evaluate_all(pair: BodyPairState, cfg: CbfConfig, instants: Sequence[bool]) -> List[_Evaluation]:
    # one cone solver call covers every requested instant (now and/or one tick ahead)
    poses = [robust_obstacle_pose(pair, cfg, *_mean_configuration(pair, ahead)) for ahead in instants]
    solutions = min_scaling_batch(
        [(pair.robot_primitive, pair.robot_pose, pair.obstacle_primitive, pose) for pose in poses]
    )
    return [_evaluation(pair, cfg, pose, _check(pair, solution)) for pose, solution in zip(poses, solutions)]


def _evaluate(pair: BodyPairState, cfg: CbfConfig, ahead: bool = False) -> _Evaluation:
    return _evaluate_all(pair, cfg, [ahead])[0]


def cbf_value(pair: BodyPairState, cfg: CbfConfig) -> float:
    """h = α*(x, ψ) − β, with ψ replaced by the worst-case pose in noise-robust mode.

    Coincident origins give ``-inf``.
    """
    return _evaluate(pair, cfg).plain


def inflated_cbf_value(pair: BodyPairState, cfg: CbfConfig) -> float:
    """(1 + b)·a_v·α* − β with a_v = (v_o − v_r)ᵀ(p_r − p_o)."""
    return _evaluate(pair, cfg).inflated


def cbf_time_partial(pair: BodyPairState, cfg: CbfConfig, mode: Mode = "plain") -> float:
    """Forward difference (h(x, ψ(t+Δt)) − h(x, ψ(t))) / Δt at fixed robot state."""
    now, ahead = _evaluate_all(pair, cfg, [False, True])
    return _time_partial(now, ahead, cfg, mode)


def _time_partial(now: _Evaluation, ahead: _Evaluation, cfg: CbfConfig, mode: Mode) -> float:
    h_now, h_ahead = now.value(mode), ahead.value(mode)
    if not (np.isfinite(h_now) and np.isfinite(h_ahead)):
        return 0.0
    return (h_ahead - h_now) / cfg.dt


def _emergency_row(pair: BodyPairState, n_inputs: int) -> ConstraintRow:
    tracer.log_event("emergency_stop", {"robot_index": pair.robot_index, "obstacle_index": pair.obstacle_index})
    return ConstraintRow(
        a=np.zeros(n_inputs),
        c=0.0,
        robot_index=pair.robot_index,
        obstacle_index=pair.obstacle_index,
        h=-np.inf,
        dhdt=0.0,
        alpha_star=0.0,
        emergency=True,
    )


def _row(pair, cfg, F, G, J_v, J_w, now: _Evaluation, ahead: Optional[_Evaluation], mode: Mode) -> ConstraintRow:
    # rhs_only keeps gradient and time partial on the plain barrier
    derivative_mode: Mode = "plain" if cfg.rhs_only else mode

    grad_robot, _ = min_scaling_gradient(
        pair.robot_primitive, pair.robot_pose, pair.obstacle_primitive, now.obstacle_pose, now.solution,
        method=cfg.gradient_method,
    )
    g_pos, g_rot = grad_robot.position, grad_robot.orientation
    if derivative_mode == "inflated":
        scale = (1.0 + cfg.b) * now.projection
        g_pos, g_rot = scale * g_pos, scale * g_rot
        if cfg.differentiate_projection:
            g_pos = g_pos + (1.0 + cfg.b) * now.solution.alpha_star * (pair.obstacle_velocity - pair.robot_velocity)
    dhdx = g_pos @ J_v + g_rot @ J_w

    dhdt = _time_partial(now, ahead, cfg, derivative_mode) if ahead is not None else 0.0
    h = now.value(mode)
    return ConstraintRow(
        a=dhdx @ G,
        c=float(-cfg.gamma * h - dhdt - dhdx @ F),
        robot_index=pair.robot_index,
        obstacle_index=pair.obstacle_index,
        h=float(h),
        dhdt=float(dhdt),
        alpha_star=now.solution.alpha_star,
        mode=mode,
    )


def pair_rows(
    pair: BodyPairState,
    cfg: CbfConfig,
    drift: np.ndarray,
    actuation: np.ndarray,
) -> List[ConstraintRow]:
    """Rows contributed by one pair, primary row first.

    With velocity inflation active the inflated row comes first and, when
    ``retain_plain_row`` is set, the plain barrier row follows it.
    """
    F = np.asarray(drift, dtype=float)
    G = np.asarray(actuation, dtype=float)
    if G.ndim != 2 or G.shape[0] != F.size:
        raise ParameterError(f"Actuation matrix shape {G.shape} does not match drift size {F.size}")
    J_v, J_w = pair.jacobians(F.size)

    if cfg.time_varying:
        now, ahead = _evaluate_all(pair, cfg, [False, True])
    else:
        now, ahead = _evaluate(pair, cfg), None
    if now.solution.status == ScalingStatus.DEGENERATE:
        return [_emergency_row(pair, G.shape[1])]

    if cfg.actuation_inflated and (now.inflated > 0.0 or cfg.inflate_when_receding):
        rows = [_row(pair, cfg, F, G, J_v, J_w, now, ahead, "inflated")]
        if cfg.retain_plain_row:
            rows.append(_row(pair, cfg, F, G, J_v, J_w, now, ahead, "plain"))
        return rows
    return [_row(pair, cfg, F, G, J_v, J_w, now, ahead, "plain")]


def constraint_row(
    pair: BodyPairState,
    cfg: CbfConfig,
    drift: np.ndarray,
    actuation: np.ndarray,
) -> ConstraintRow:
    """Affine row ``a·u >= c`` enforcing ∂h/∂x·(F + G u) + ∂h/∂t >= −γ h.

    Args:
        pair: geometric and estimated state of the pair.
        cfg: barrier parameters; selects plain, noise-robust and/or
            velocity-inflated barrier.
        drift: F(x), shape (n,).
        actuation: G(x), shape (n, m).

    Returns:
        The primary row of the pair. Coincident origins give an emergency row
        with ``h = -inf`` and no constraint coefficients.
    """
    return pair_rows(pair, cfg, drift, actuation)[0]


def scaling_lower_bound(pair: BodyPairState) -> float:
    """α* >= ‖r_a − r_b‖ / (ρ_a + ρ_b) from circumscribing spheres."""
    reach = pair.robot_primitive.bounding_radius() + pair.obstacle_primitive.bounding_radius()
    return float(np.linalg.norm(pair.robot_pose.r - pair.obstacle_pose.r)) / reach


def _speed_bound(J: np.ndarray, drift: np.ndarray, actuation: np.ndarray, u_limit: np.ndarray) -> float:
    # max ‖J G u‖ over the box, bounded both per column and by the spectral norm
    JG = J @ actuation
    spread = min(float(np.linalg.norm(JG, axis=0) @ u_limit), float(np.linalg.norm(JG, 2) * np.linalg.norm(u_limit)))
    return float(np.linalg.norm(J @ drift)) + spread


def _rate_terms(pair: BodyPairState, cfg: CbfConfig, drift, actuation, u_limit) -> Optional[Tuple[float, float]]:
    if pair.predicted_obstacle_pose is None:
        return None
    F = np.asarray(drift, dtype=float)
    G = np.asarray(actuation, dtype=float)
    J_v, J_w = pair.jacobians(F.size)
    predicted = pair.predicted_obstacle_pose
    v_obstacle = float(np.linalg.norm(predicted.r - pair.obstacle_pose.r)) / cfg.dt
    w_obstacle = float(np.linalg.norm(rotations.right_difference(pair.obstacle_pose.q, predicted.q))) / cfg.dt
    v_robot = _speed_bound(J_v, F, G, u_limit)
    w_robot = _speed_bound(J_w, F, G, u_limit)

    inner = pair.robot_primitive.inradius() + pair.obstacle_primitive.inradius()
    turning = pair.robot_primitive.bounding_radius() * w_robot + pair.obstacle_primitive.bounding_radius() * w_obstacle
    return (v_robot + v_obstacle) / inner, turning / inner


def scaling_rate_bound(
    pair: BodyPairState,
    cfg: CbfConfig,
    drift: np.ndarray,
    actuation: np.ndarray,
    u_limit: np.ndarray,
    alpha: float,
) -> Optional[float]:
    """Upper bound on |dα*/dt| for every command with |u_j| <= u_limit[j].

    Uses ‖∂α*/∂r‖ <= 1/ρ and ‖∂α*/∂θ‖ <= α·R/ρ, with ρ the summed inradii
    and R the bounding radius of the rotating body. Obstacle motion is taken
    over one tick from the predicted pose. ``None`` when that pose is missing.
    """
    terms = _rate_terms(pair, cfg, drift, actuation, np.asarray(u_limit, dtype=float))
    if terms is None:
        return None
    translation, turning = terms
    return translation + alpha * turning


def _cannot_activate(pair: BodyPairState, cfg: CbfConfig, drift, actuation, u_limit, alpha_lower: float) -> bool:
    # plain row a·u >= c is slack for every admissible u once γh > max |ḣ|
    if cfg.actuation_inflated and (cfg.inflate_when_receding or _projected_velocity(pair, pair.obstacle_pose.r) > 0.0):
        return False
    terms = _rate_terms(pair, cfg, drift, actuation, u_limit)
    if terms is None:
        return False
    translation, turning = terms
    # γ(α − β) − (translation + α·turning) grows with α when γ > turning
    return cfg.gamma > turning and cfg.gamma * (alpha_lower - cfg.beta) > translation + alpha_lower * turning


def assemble_rows(
    pairs: Sequence[BodyPairState],
    cfg: CbfConfig,
    drift: np.ndarray,
    actuation: np.ndarray,
    u_limit: Optional[np.ndarray] = None,
) -> Tuple[List[ConstraintRow], int]:
    """Rows for every pair that can still constrain the command.

    A pair is pruned when its barrier exceeds ``prune_threshold`` or, given
    the per-input magnitude limit ``u_limit``, when its row is slack for
    every admissible command.

    Returns:
        (rows in pair order, number of pruned pairs)
    """
    rows: List[ConstraintRow] = []
    pruned = 0
    for pair in pairs:
        # noise-robust shifts can move the obstacle by k·σ, so only prune the exact mean case
        if not cfg.noise_robust:
            alpha_lower = scaling_lower_bound(pair)
            if alpha_lower - cfg.beta > cfg.prune_threshold or (
                u_limit is not None and alpha_lower > 0.0
                and _cannot_activate(pair, cfg, drift, actuation, np.asarray(u_limit, dtype=float), alpha_lower)
            ):
                pruned += 1
                continue
        pair_result = pair_rows(pair, cfg, drift, actuation)
        primary = pair_result[0]
        if not primary.emergency and primary.alpha_star - cfg.beta > cfg.prune_threshold:
            pruned += 1
            continue
        rows.extend(pair_result)
    return rows, pruned
