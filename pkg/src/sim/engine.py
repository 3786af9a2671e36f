"""Fixed-tick simulation loop."""
import time
from typing import List, Optional

import numpy as np
import pandas as pd
from pydantic import BaseModel

from control.controllers.base import ControlContext, Controller, ObstacleEstimate, RobotSegment
from control.factory import ControllerFactory
from estimation.belief import PoseMeasurement
from estimation.ekf import ObstacleTracker
from geometry.distance import oracle_distance
from geometry.primitives import Pose
from geometry.scaling import ScalingStatus, min_scaling
from utils import rotations
from utils.errors import ScalingFailure, ScenarioError
from utils.tracer import tracer
from .robots import RobotModel, build_robot
from .scenario import Scenario


class TickRecord(BaseModel):
    t: float
    state: List[float]
    u: List[float]
    u_ref: List[float]
    h: List[float]
    alpha: List[float]
    distance: List[float]
    status: str
    solve_time: float
    step_time: float
    fallback: bool = False
    pruned: int = 0


class Trace(BaseModel):
    scenario: Scenario
    records: List[TickRecord] = []

    @property
    def pair_labels(self) -> List[str]:
        n_r = len(self.scenario.robot.primitives)
        n_o = len(self.scenario.obstacles)
        return [f"{i}_{j}" for i in range(n_r) for j in range(n_o)]

    def to_frame(self) -> pd.DataFrame:
        """Flat per-tick table; column order is the persisted field order."""
        n_x = len(self.scenario.robot.initial_state)
        labels = self.pair_labels
        columns = (
            ["t"]
            + [f"x_{i}" for i in range(n_x)]
            + [f"u_{i}" for i in range(n_x)]
            + [f"uref_{i}" for i in range(n_x)]
            + [f"h_{p}" for p in labels]
            + [f"alpha_{p}" for p in labels]
            + [f"dist_{p}" for p in labels]
            + ["status", "solve_time", "step_time", "fallback", "pruned"]
        )
        rows = [
            [r.t, *r.state, *r.u, *r.u_ref, *r.h, *r.alpha, *r.distance,
             r.status, r.solve_time, r.step_time, r.fallback, r.pruned]
            for r in self.records
        ]
        return pd.DataFrame(rows, columns=columns)


class Simulation:
    """One scenario run: ground-truth world, measurement/estimation pipeline, controller."""

    def __init__(self, scenario: Scenario, controller: Optional[Controller] = None):
        self.scenario = scenario
        self.robot: RobotModel = build_robot(scenario.robot)
        spec = scenario.controller.model_copy(update={"cbf": scenario.controller.cbf.with_overrides(dt=scenario.dt)})
        self.controller = controller or ControllerFactory.create_controller(spec)
        self.rng = np.random.default_rng(scenario.seed)
        self.trackers = [ObstacleTracker(scenario.noise.ekf) for _ in scenario.obstacles] if scenario.noise else []
        self.k = 0
        self.x = np.asarray(scenario.robot.initial_state, dtype=float)
        self.last_u = np.zeros(self.robot.n_state)

    @property
    def t(self) -> float:
        return self.k * self.scenario.dt

    def true_obstacle_poses(self, t: float) -> List[Pose]:
        return [script.pose_at(t) for script in self.scenario.obstacles]

    def check_initial_safety(self):
        beta = self.scenario.controller.cbf.beta
        obstacles = self.true_obstacle_poses(0.0)
        for i, (prim, pose) in enumerate(zip(self.robot.primitives, self.robot.segment_poses(self.x))):
            for j, (script, obs_pose) in enumerate(zip(self.scenario.obstacles, obstacles)):
                solution = min_scaling(prim, pose, script.primitive, obs_pose)
                if solution.status in (ScalingStatus.MAX_ITER, ScalingStatus.INFEASIBLE):
                    raise ScalingFailure(f"Initial scaling solve for pair ({i}, {j}) ended with {solution.status.value}")
                if not solution.ok or solution.alpha_star <= beta:
                    raise ScenarioError(
                        f"Pair ({i}, {j}) starts outside the safe set: α* = {solution.alpha_star:.6g}, β = {beta}"
                    )

    def realize(self, command: np.ndarray) -> np.ndarray:
        """Velocity the actuator delivers this tick for ``command``."""
        spec = self.scenario.robot
        u = np.asarray(command, dtype=float)
        if spec.actuator_time_constant > 0.0:
            blend = min(1.0, self.scenario.dt / spec.actuator_time_constant)
            u = self.last_u + blend * (u - self.last_u)
        if spec.velocity_limit is not None:
            u = np.clip(u, -spec.velocity_limit, spec.velocity_limit)
        return u

    def _measure(self, pose: Pose) -> PoseMeasurement:
        noise = self.scenario.noise
        dims = 2 if noise.planar else 3
        position = pose.r.copy()
        position[:dims] += self.rng.normal(0.0, np.sqrt(noise.position_variance), dims)
        q = pose.q
        if noise.orientation_variance > 0.0:
            q = rotations.multiply(q, rotations.exp(self.rng.normal(0.0, np.sqrt(noise.orientation_variance), 3)))
        return PoseMeasurement(position=position, quaternion=q, noise=noise.measurement_noise())

    def _estimates(self, t: float, poses: List[Pose]) -> List[ObstacleEstimate]:
        dt = self.scenario.dt
        estimates = []
        for j, (script, pose) in enumerate(zip(self.scenario.obstacles, poses)):
            if self.scenario.noise is None:
                velocity = script.velocity_at(t)
                turn = rotations.exp(script.angular_velocity_at(t) * dt)
                predicted = Pose.from_arrays(pose.r + velocity * dt, rotations.multiply(pose.q, turn))
                estimates.append(ObstacleEstimate(
                    index=j, primitive=script.primitive, pose=pose, velocity=velocity, predicted_pose=predicted,
                ))
                continue
            tracker = self.trackers[j]
            if tracker.belief is None or self._measurement_due():
                tracker.observe(self._measure(pose), t)
            since = max(0.0, t - tracker.last_time)
            current, current_cov = tracker.predict(since)
            predicted, predicted_cov = tracker.predict(since + dt)
            estimates.append(ObstacleEstimate(
                index=j,
                primitive=script.primitive,
                pose=current,
                velocity=tracker.belief.velocity,
                predicted_pose=predicted,
                position_covariance=current_cov,
                predicted_position_covariance=predicted_cov,
            ))
        return estimates

    def _measurement_due(self) -> bool:
        period = self.scenario.noise.measurement_period
        if period is None:
            return True
        return self.k % max(1, int(round(period / self.scenario.dt))) == 0

    def step(self) -> TickRecord:
        """Advance one tick and return the record of the state the tick started from."""
        scenario = self.scenario
        t = self.t
        x = self.x
        obstacle_poses = self.true_obstacle_poses(t)
        segment_poses = self.robot.segment_poses(x)
        jacobians = self.robot.segment_jacobians(x)

        alphas, distances = [], []
        for i, (prim, pose) in enumerate(zip(self.robot.primitives, segment_poses)):
            for j, (script, obs_pose) in enumerate(zip(scenario.obstacles, obstacle_poses)):
                solution = min_scaling(prim, pose, script.primitive, obs_pose)
                if solution.status in (ScalingStatus.MAX_ITER, ScalingStatus.INFEASIBLE):
                    # NaN marks the tick as a hard failure in the run summary
                    tracer.log_event("ground_truth_failure", {"t": t, "pair": [i, j], "status": solution.status.value})
                    alphas.append(float("nan"))
                else:
                    alphas.append(solution.alpha_star)
                distances.append(oracle_distance(prim, pose, script.primitive, obs_pose))
        beta = scenario.controller.cbf.beta

        segments = [
            RobotSegment(
                index=i, primitive=prim, pose=pose, velocity=J_v @ self.last_u,
                position_jacobian=J_v, orientation_jacobian=J_w,
            )
            for i, (prim, pose, (J_v, J_w)) in enumerate(zip(self.robot.primitives, segment_poses, jacobians))
        ]
        position = self.robot.position(x)
        target = None if scenario.target is None else np.asarray(scenario.target, dtype=float)
        u_ref = scenario.controller.reference.evaluate(position, target, x, self.last_u)

        start = time.perf_counter()
        context = ControlContext(
            t=t,
            state=x.copy(),
            position=position,
            segments=segments,
            obstacles=self._estimates(t, obstacle_poses),
            u_ref=u_ref,
            drift=self.robot.drift(x),
            actuation=self.robot.actuation(x),
            target=None if target is None else target[:position.size],
        )
        output = self.controller.compute(context)
        step_time = time.perf_counter() - start

        u = self.realize(scenario.controller.box.clip(output.u))
        self.x = self.robot.step(x, u, scenario.dt)
        self.last_u = u
        self.k += 1

        return TickRecord(
            t=t,
            state=x.tolist(),
            u=u.tolist(),
            u_ref=np.asarray(u_ref, dtype=float).tolist(),
            h=[a - beta for a in alphas],
            alpha=alphas,
            distance=distances,
            status=output.status,
            solve_time=output.solve_time,
            step_time=step_time,
            fallback=output.fallback,
            pruned=output.pruned,
        )


def run(scenario: Scenario) -> Trace:
    """Execute ``round(duration/dt)`` ticks; deterministic for a given seed."""
    tracer.start_span("run_scenario", {
        "scenario": scenario.name,
        "controller": scenario.controller.kind,
        "seed": scenario.seed,
        "steps": scenario.steps,
    })
    sim = Simulation(scenario)
    try:
        sim.check_initial_safety()
    except (ScenarioError, ScalingFailure) as e:
        tracer.end_span(error=str(e))
        raise

    records = [sim.step() for _ in range(scenario.steps)]
    trace = Trace(scenario=scenario, records=records)
    hard_failures = sum(r.status == "HardFailure" or not np.all(np.isfinite(r.alpha)) for r in records)
    tracer.end_span(outputs={"ticks": len(records), "hard_failures": hard_failures})
    return trace
