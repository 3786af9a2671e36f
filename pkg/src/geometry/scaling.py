"""Minimum uniform scaling between two convex primitives.

The program solved is

    min α  s.t.  p ∈ α·A(ψ_a) ∩ α·B(ψ_b)

written as a conic program ``min cᵀx s.t. Gx + s = h, s ∈ K`` over
``x = (p, α, aux...)`` and handed to the cvxopt interior-point cone solver.
Every body contributes its own rows; the duals of those rows are kept on the
solution so that pose gradients can be read off the Lagrangian.
"""
from enum import Enum
from typing import Dict, List, Literal, Optional, Sequence, Tuple

import numpy as np
from cvxopt import matrix, solvers
from pydantic import BaseModel, ConfigDict

from utils.errors import GradientUndefinedError, ParameterError
from utils.tracer import tracer
from .primitives import Capsule, ConvexPrimitive, Polytope, Pose, Sphere

DEGENERATE_DISTANCE = 1e-9
DEFAULT_SOLVER_OPTIONS: Dict[str, float] = {
    "show_progress": False,
    "maxiters": 200,
    "abstol": 1e-9,
    "reltol": 1e-9,
    "feastol": 1e-9,
    "refinement": 2,
}
# Tolerances tried after the solver hits a numerical domain error.
RETRY_TOLERANCES = (1e-8,)


class ScalingStatus(str, Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    MAX_ITER = "MaxIter"
    DEGENERATE = "Degenerate"


class ScalingSolution(BaseModel):
    """Result of :func:`min_scaling`.

    ``duals`` holds, per body, the multipliers of that body's rows in the
    order ``[linear rows..., cone rows...]``. ``aux`` holds the capsule
    segment coordinate of each body (``None`` for other kinds).
    """
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    alpha_star: float
    p_star: np.ndarray
    status: ScalingStatus
    iterations: int = 0
    duals: Tuple[np.ndarray, np.ndarray] = (np.zeros(0), np.zeros(0))
    aux: Tuple[Optional[float], Optional[float]] = (None, None)

    @property
    def ok(self) -> bool:
        return self.status == ScalingStatus.OPTIMAL


class PoseGradient(BaseModel):
    """∂α*/∂pose of one body: position part and world-frame orientation tangent."""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    position: np.ndarray
    orientation: np.ndarray


def scaled_set_contains(prim: ConvexPrimitive, pose: Pose, alpha: float, p, tol: float = 1e-9) -> bool:
    """Membership of world point ``p`` in ``α·prim`` placed at ``pose``."""
    if not alpha > 0.0:
        raise ParameterError(f"Scale factor must be positive, got {alpha}")
    return prim.contains_scaled(pose.to_body(p), alpha, tol)


class _BodyRows:
    """Conic rows of a single body, expressed against the shared variable vector."""

    def __init__(self, n_vars: int):
        self.n_vars = n_vars
        self.G_lin: List[np.ndarray] = []
        self.h_lin: List[float] = []
        self.G_cone: Optional[np.ndarray] = None
        self.h_cone: Optional[np.ndarray] = None
        # cone rows are stored divided by this factor
        self.cone_scale = 1.0

    @property
    def n_lin(self) -> int:
        return len(self.h_lin)

    @property
    def n_cone(self) -> int:
        return 0 if self.h_cone is None else len(self.h_cone)


def _body_rows(prim: ConvexPrimitive, pose: Pose, n_vars: int, aux_index: Optional[int],
               origin: np.ndarray) -> _BodyRows:
    # p is solved relative to origin
    rows = _BodyRows(n_vars)
    r, R = pose.r - origin, pose.R

    if isinstance(prim, Polytope):
        # A Rᵀ (p - r) <= α b
        ART = prim.A @ R.T
        for i in range(ART.shape[0]):
            g = np.zeros(n_vars)
            g[:3] = ART[i]
            g[3] = -prim.b[i]
            rows.G_lin.append(g)
            rows.h_lin.append(float(ART[i] @ r))
        return rows

    # ‖p - r - s·a‖ / radius <= α, with s = 0 for spheres
    inv = 1.0 / prim.radius
    G = np.zeros((4, n_vars))
    G[0, 3] = -1.0
    G[1:, :3] = -inv * np.eye(3)
    h = np.concatenate([[0.0], -inv * r])

    if isinstance(prim, Capsule):
        axis = R[:, 2]
        G[1:, aux_index] = inv * axis
        for sign in (1.0, -1.0):
            # α·L/2 ∓ s >= 0
            g = np.zeros(n_vars)
            g[3] = -prim.half_length
            g[aux_index] = sign
            rows.G_lin.append(g)
            rows.h_lin.append(0.0)

    rows.G_cone = G
    rows.h_cone = h
    rows.cone_scale = prim.radius
    return rows


def _sphere_pair(a: Sphere, pose_a: Pose, b: Sphere, pose_b: Pose, dist: float) -> ScalingSolution:
    total = a.radius + b.radius
    alpha = dist / total
    n = (pose_a.r - pose_b.r) / dist
    p_star = pose_a.r - alpha * a.radius * n
    dual_a = np.concatenate([[1.0 / total], n / total])
    dual_b = np.concatenate([[1.0 / total], -n / total])
    return ScalingSolution(
        alpha_star=float(alpha),
        p_star=p_star,
        status=ScalingStatus.OPTIMAL,
        duals=(dual_a, dual_b),
    )


def _status_from(sol: dict, tol: float) -> ScalingStatus:
    status = sol["status"]
    if status == "optimal":
        return ScalingStatus.OPTIMAL
    if status in ("primal infeasible", "dual infeasible"):
        return ScalingStatus.INFEASIBLE
    gap = sol.get("relative gap")
    pres = sol.get("primal infeasibility")
    dres = sol.get("dual infeasibility")
    if gap is not None and pres is not None and dres is not None and max(gap, pres, dres) <= tol:
        return ScalingStatus.OPTIMAL
    return ScalingStatus.MAX_ITER


def _solve_cone_program(c: np.ndarray, G: np.ndarray, h: np.ndarray, dims: dict, options: dict) -> Optional[dict]:
    """Run conelp, loosening tolerances when it hits a numerical domain error.

    Returns None when every attempt raised.
    """
    attempts = [options] + [
        {**options, "abstol": tol, "reltol": tol, "feastol": tol}
        for tol in RETRY_TOLERANCES
        if tol > options.get("feastol", 0.0)
    ]
    for attempt in attempts:
        try:
            return solvers.conelp(matrix(c), matrix(G), matrix(h), dims, options=attempt)
        except (ArithmeticError, ValueError) as exc:
            tracer.log_event("scaling_solver_error", {"error": str(exc), "feastol": attempt.get("feastol")})
    return None


class _Program:
    """Rows of one pair over its own variable block ``(p, α, aux...)``."""

    def __init__(self, prim_a: ConvexPrimitive, pose_a: Pose, prim_b: ConvexPrimitive, pose_b: Pose):
        n_vars = 4
        self.aux_a = self.aux_b = None
        if isinstance(prim_a, Capsule):
            self.aux_a = n_vars
            n_vars += 1
        if isinstance(prim_b, Capsule):
            self.aux_b = n_vars
            n_vars += 1
        self.n_vars = n_vars

        self.origin = 0.5 * (pose_a.r + pose_b.r)
        self.body_a = _body_rows(prim_a, pose_a, n_vars, self.aux_a, self.origin)
        self.body_b = _body_rows(prim_b, pose_b, n_vars, self.aux_b, self.origin)

        # α >= 0 leads the linear block
        alpha_row = np.zeros(n_vars)
        alpha_row[3] = -1.0
        self.G_lin = np.vstack([alpha_row] + self.body_a.G_lin + self.body_b.G_lin)
        self.h_lin = np.asarray([0.0] + self.body_a.h_lin + self.body_b.h_lin)
        self.cones = [body for body in (self.body_a, self.body_b) if body.G_cone is not None]

    @property
    def n_lin(self) -> int:
        return len(self.h_lin)

    def solution(self, x: np.ndarray, z_lin: np.ndarray, z_cone: np.ndarray, iterations: int) -> ScalingSolution:
        a, b = self.body_a, self.body_b
        # z_lin = [α row | A lin | B lin], z_cone = [A cone | B cone]
        lin_a = z_lin[1:1 + a.n_lin]
        lin_b = z_lin[1 + a.n_lin:1 + a.n_lin + b.n_lin]
        # back to the multipliers of the unscaled cone rows
        cone_a = z_cone[:a.n_cone] / a.cone_scale
        cone_b = z_cone[a.n_cone:a.n_cone + b.n_cone] / b.cone_scale
        return ScalingSolution(
            alpha_star=float(x[3]),
            p_star=x[:3] + self.origin,
            status=ScalingStatus.OPTIMAL,
            iterations=iterations,
            duals=(np.concatenate([lin_a, cone_a]), np.concatenate([lin_b, cone_b])),
            aux=(
                None if self.aux_a is None else float(x[self.aux_a]),
                None if self.aux_b is None else float(x[self.aux_b]),
            ),
        )


def _failed(status: ScalingStatus, iterations: int = 0) -> ScalingSolution:
    return ScalingSolution(alpha_star=float("nan"), p_star=np.full(3, np.nan), status=status, iterations=iterations)


def _solve_programs(programs: List[_Program], options: dict, acceptance_tol: float) -> List[ScalingSolution]:
    """Solve independent programs as one block-diagonal cone program.

    A batch that does not end Optimal is re-solved program by program so a
    failure stays with the pair it belongs to.
    """
    offsets = np.cumsum([0] + [prog.n_vars for prog in programs])
    n_total = int(offsets[-1])

    def placed(block: np.ndarray, k: int) -> np.ndarray:
        out = np.zeros((block.shape[0], n_total))
        out[:, offsets[k]:offsets[k + 1]] = block
        return out

    G_blocks = [placed(prog.G_lin, k) for k, prog in enumerate(programs)]
    h_blocks = [prog.h_lin for prog in programs]
    cones: List[int] = []
    for k, prog in enumerate(programs):
        for body in prog.cones:
            G_blocks.append(placed(body.G_cone, k))
            h_blocks.append(body.h_cone)
            cones.append(body.n_cone)

    c = np.zeros(n_total)
    c[offsets[:-1] + 3] = 1.0
    dims = {"l": sum(prog.n_lin for prog in programs), "q": cones, "s": []}
    sol = _solve_cone_program(c, np.vstack(G_blocks), np.concatenate(h_blocks), dims, options)
    status = ScalingStatus.MAX_ITER if sol is None else _status_from(sol, acceptance_tol)

    if sol is None or sol["x"] is None or status != ScalingStatus.OPTIMAL:
        if len(programs) > 1:
            return [_solve_programs([prog], options, acceptance_tol)[0] for prog in programs]
        return [_failed(status, 0 if sol is None else int(sol.get("iterations", 0)))]

    x = np.array(sol["x"]).ravel()
    z = np.array(sol["z"]).ravel()
    iterations = int(sol["iterations"])
    results = []
    lin_at, cone_at = 0, dims["l"]
    for k, prog in enumerate(programs):
        n_cone = sum(body.n_cone for body in prog.cones)
        results.append(prog.solution(
            x[offsets[k]:offsets[k + 1]],
            z[lin_at:lin_at + prog.n_lin],
            z[cone_at:cone_at + n_cone],
            iterations,
        ))
        lin_at += prog.n_lin
        cone_at += n_cone
    return results


def _direct(prim_a: ConvexPrimitive, pose_a: Pose, prim_b: ConvexPrimitive, pose_b: Pose,
            closed_form: bool) -> Optional[ScalingSolution]:
    # answers that need no cone solve
    dist = float(np.linalg.norm(pose_a.r - pose_b.r))
    if dist < DEGENERATE_DISTANCE:
        return ScalingSolution(alpha_star=0.0, p_star=pose_a.r.copy(), status=ScalingStatus.DEGENERATE)
    if closed_form and isinstance(prim_a, Sphere) and isinstance(prim_b, Sphere):
        return _sphere_pair(prim_a, pose_a, prim_b, pose_b, dist)
    return None


def min_scaling(
    prim_a: ConvexPrimitive,
    pose_a: Pose,
    prim_b: ConvexPrimitive,
    pose_b: Pose,
    *,
    closed_form: bool = True,
    solver_options: Optional[Dict[str, float]] = None,
    acceptance_tol: float = 1e-7,
) -> ScalingSolution:
    """Smallest α for which the α-scaled bodies share a point.

    Args:
        prim_a, pose_a: first body and its placement.
        prim_b, pose_b: second body and its placement.
        closed_form: use α* = d/(R_a + R_b) for sphere pairs.
        solver_options: overrides for the cvxopt cone solver.
        acceptance_tol: residual/gap bound under which a stalled solve still
            counts as Optimal.

    Returns:
        A ScalingSolution; coincident origins give status Degenerate with
        α* = 0 and p* = r_a.
    """
    return min_scaling_batch(
        [(prim_a, pose_a, prim_b, pose_b)],
        closed_form=closed_form, solver_options=solver_options, acceptance_tol=acceptance_tol,
    )[0]


def min_scaling_batch(
    problems: Sequence[Tuple[ConvexPrimitive, Pose, ConvexPrimitive, Pose]],
    *,
    closed_form: bool = True,
    solver_options: Optional[Dict[str, float]] = None,
    acceptance_tol: float = 1e-7,
) -> List[ScalingSolution]:
    """:func:`min_scaling` for several pairs with a single cone solver call.

    The pairs share no variables, so each result equals its stand-alone
    solve up to solver tolerance.
    """
    results: List[Optional[ScalingSolution]] = [_direct(*problem, closed_form) for problem in problems]
    pending = [k for k, result in enumerate(results) if result is None]
    if pending:
        options = {**DEFAULT_SOLVER_OPTIONS, **(solver_options or {})}
        programs = [_Program(*problems[k]) for k in pending]
        for k, solution in zip(pending, _solve_programs(programs, options, acceptance_tol)):
            results[k] = solution
    return results


def _analytic_body_gradient(prim: ConvexPrimitive, pose: Pose, solution: ScalingSolution, dual: np.ndarray,
                            aux: Optional[float]) -> PoseGradient:
    # dα*/dθ = -zᵀ ∂s/∂θ for the slack s = h - Gx of this body's rows
    if isinstance(prim, Polytope):
        w = pose.R @ prim.A.T @ dual
        return PoseGradient(position=-w, orientation=np.cross(w, solution.p_star - pose.r))

    z_vec = dual[-3:]
    if isinstance(prim, Capsule):
        axis = pose.R[:, 2]
        return PoseGradient(position=z_vec.copy(), orientation=aux * np.cross(axis, z_vec))
    return PoseGradient(position=z_vec.copy(), orientation=np.zeros(3))


def _finite_difference_gradients(prim_a, pose_a, prim_b, pose_b, step: float, angle_step: float,
                                 **solve_kwargs) -> Tuple[PoseGradient, PoseGradient]:
    def alpha(pa: Pose, pb: Pose) -> float:
        sol = min_scaling(prim_a, pa, prim_b, pb, **solve_kwargs)
        if not sol.ok:
            raise GradientUndefinedError(f"Perturbed scaling solve ended with status {sol.status.value}")
        return sol.alpha_star

    grads = []
    for which in (0, 1):
        g_pos = np.zeros(3)
        g_rot = np.zeros(3)
        for i in range(3):
            e = np.zeros(3)
            e[i] = 1.0
            if which == 0:
                g_pos[i] = (alpha(pose_a.translated(step * e), pose_b) - alpha(pose_a.translated(-step * e), pose_b)) / (2 * step)
                g_rot[i] = (alpha(pose_a.rotated(angle_step * e), pose_b) - alpha(pose_a.rotated(-angle_step * e), pose_b)) / (2 * angle_step)
            else:
                g_pos[i] = (alpha(pose_a, pose_b.translated(step * e)) - alpha(pose_a, pose_b.translated(-step * e))) / (2 * step)
                g_rot[i] = (alpha(pose_a, pose_b.rotated(angle_step * e)) - alpha(pose_a, pose_b.rotated(-angle_step * e))) / (2 * angle_step)
        grads.append(PoseGradient(position=g_pos, orientation=g_rot))
    return grads[0], grads[1]


def min_scaling_gradient(
    prim_a: ConvexPrimitive,
    pose_a: Pose,
    prim_b: ConvexPrimitive,
    pose_b: Pose,
    solution: ScalingSolution,
    *,
    method: Literal["finite_difference", "analytic"] = "finite_difference",
    step: float = 1e-6,
    angle_step: float = 1e-6,
    closed_form: bool = True,
) -> Tuple[PoseGradient, PoseGradient]:
    """∂α*/∂(r_a, θ_a) and ∂α*/∂(r_b, θ_b) at a previously computed solution.

    Orientation components are with respect to a world-frame left rotation
    ``R ← exp([δ]×)·R``.

    Raises:
        GradientUndefinedError: the solution is not Optimal.
    """
    if not solution.ok:
        raise GradientUndefinedError(f"Gradient undefined for scaling status {solution.status.value}")

    if method == "analytic":
        grad_a = _analytic_body_gradient(prim_a, pose_a, solution, solution.duals[0], solution.aux[0])
        grad_b = _analytic_body_gradient(prim_b, pose_b, solution, solution.duals[1], solution.aux[1])
        return grad_a, grad_b
    if method == "finite_difference":
        if step <= 0.0 or angle_step <= 0.0:
            raise ParameterError("Finite-difference steps must be positive")
        return _finite_difference_gradients(prim_a, pose_a, prim_b, pose_b, step, angle_step, closed_form=closed_form)
    raise ParameterError(f"Unknown gradient method: {method}")
