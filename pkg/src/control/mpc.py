"""Receding-horizon baseline with linearized half-space obstacle constraints.

The robot is a single integrator sampled at ``sample_time``. Obstacles are
represented by bounding spheres; whenever a predicted robot position comes
within ``d_risk`` of an obstacle sphere, a soft half-space constraint
tangent to the inflated sphere is added for that step.
"""
import time
from typing import Optional

import numpy as np
import osqp
from pydantic import BaseModel, ConfigDict, NonNegativeFloat, PositiveFloat, model_validator
from scipy import sparse

from utils.errors import ControllerFailure, ParameterError
from .qp import ControlBox

MPC_OSQP_SETTINGS = {
    "verbose": False,
    "eps_abs": 1e-6,
    "eps_rel": 1e-6,
    "polish": True,
    "max_iter": 20000,
    "warm_start": True,
}


class MpcConfig(BaseModel):
    horizon: PositiveFloat = 1.5
    sample_time: PositiveFloat = 0.05
    d_risk: NonNegativeFloat = 1.5
    d_obs: NonNegativeFloat = 1.5
    w_target: NonNegativeFloat = 0.1
    w_effort: NonNegativeFloat = 0.1
    w_avoid: NonNegativeFloat = 10.0
    slack_quadratic: NonNegativeFloat = 1e-3
    robot_radius: PositiveFloat = 0.5
    obstacle_radius: PositiveFloat = 1.0

    @model_validator(mode="after")
    def _integral_horizon(self) -> "MpcConfig":
        ratio = self.horizon / self.sample_time
        if abs(ratio - round(ratio)) > 1e-9 or round(ratio) < 1:
            raise ParameterError(f"Horizon {self.horizon} is not a whole number of {self.sample_time} steps")
        return self

    @property
    def steps(self) -> int:
        return int(round(self.horizon / self.sample_time))


class MpcResult(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    u: np.ndarray
    plan: np.ndarray
    solution: np.ndarray
    active_constraints: int
    solve_time: float


def mpc_baseline(
    position,
    target,
    obstacle_prediction,
    cfg: MpcConfig,
    box: ControlBox,
    *,
    previous_plan: Optional[np.ndarray] = None,
    warm_start: Optional[np.ndarray] = None,
) -> MpcResult:
    """First command of the horizon plan.

    Args:
        position: current robot position, shape (m,).
        target: goal position, shape (m,).
        obstacle_prediction: obstacle centers at t + kΔt for k = 0..N,
            shape (N+1, >=m) or (n_obstacles, N+1, >=m).
        cfg: horizon, weights and radii.
        box: bounds on every planned command.
        previous_plan: predicted positions x_1..x_N from the last solve;
            linearization points of the half-spaces (defaults to the current
            position).
        warm_start: last primal solution with matching shape.

    Raises:
        ControllerFailure: the QP did not reach a solution.
    """
    x0 = np.asarray(position, dtype=float)
    m = x0.size
    N = cfg.steps
    dt = cfg.sample_time
    goal = np.asarray(target, dtype=float)[:m]
    if box.dims != m:
        raise ParameterError(f"Box has {box.dims} inputs, state has {m}")

    obstacles = np.asarray(obstacle_prediction, dtype=float)
    if obstacles.ndim == 2:
        obstacles = obstacles[None]
    if obstacles.shape[1] != N + 1:
        raise ParameterError(f"Obstacle prediction needs {N + 1} samples, got {obstacles.shape[1]}")
    obstacles = obstacles[:, :, :m]

    if previous_plan is None:
        linearization = np.tile(x0, (N, 1))
    else:
        linearization = np.asarray(previous_plan, dtype=float).reshape(N, m)

    n_u = N * m
    n_z = n_u + N
    B = dt * np.kron(np.tril(np.ones((N, N))), np.eye(m))
    X0 = np.tile(x0, N)
    T = np.tile(goal, N)

    P = np.zeros((n_z, n_z))
    P[:n_u, :n_u] = 2.0 * (cfg.w_target * B.T @ B + cfg.w_effort * np.eye(n_u))
    P[n_u:, n_u:] = 2.0 * cfg.w_avoid * cfg.slack_quadratic * np.eye(N)
    q = np.concatenate([2.0 * cfg.w_target * B.T @ (X0 - T), np.full(N, cfg.w_avoid)])

    A_rows = [np.eye(n_z)]
    lower = [np.concatenate([np.tile(box.lo, N), np.zeros(N)])]
    upper = [np.concatenate([np.tile(box.hi, N), np.full(N, np.inf)])]

    reach = cfg.robot_radius + cfg.obstacle_radius
    halfspaces = []
    for centers in obstacles:
        for k in range(1, N + 1):
            o = centers[k]
            offset = linearization[k - 1] - o
            dist = float(np.linalg.norm(offset))
            if dist >= cfg.d_risk + reach:
                continue
            if dist < 1e-9:
                offset = x0 - o
                dist = float(np.linalg.norm(offset))
                if dist < 1e-9:
                    offset, dist = np.eye(m)[0], 1.0
            n = offset / dist
            row = np.zeros(n_z)
            row[:n_u] = n @ B[(k - 1) * m:k * m]
            row[n_u + k - 1] = 1.0
            halfspaces.append(row)
            lower.append(np.array([float(n @ (o - x0)) + reach + cfg.d_obs]))
            upper.append(np.array([np.inf]))
    if halfspaces:
        A_rows.append(np.vstack(halfspaces))

    start = time.perf_counter()
    solver = osqp.OSQP()
    solver.setup(
        P=sparse.triu(sparse.csc_matrix(P), format="csc"),
        q=q,
        A=sparse.csc_matrix(np.vstack(A_rows)),
        l=np.concatenate(lower),
        u=np.concatenate(upper),
        **MPC_OSQP_SETTINGS,
    )
    if warm_start is not None and np.shape(warm_start) == (n_z,):
        solver.warm_start(x=warm_start)
    res = solver.solve()
    elapsed = time.perf_counter() - start

    if res.info.status not in ("solved", "solved inaccurate") or res.x is None:
        raise ControllerFailure(f"MPC QP ended with status '{res.info.status}'")

    z = np.asarray(res.x, dtype=float)
    plan = (X0 + B @ z[:n_u]).reshape(N, m)
    return MpcResult(
        u=box.clip(z[:m]),
        plan=plan,
        solution=z,
        active_constraints=len(halfspaces),
        solve_time=elapsed,
    )
