from typing import Optional, Tuple

import numpy as np
from pydantic import BaseModel

from utils.errors import ParameterError
from .engine import Trace
from .robots import build_robot


class RunSummary(BaseModel):
    scenario: str
    controller: str
    ticks: int
    min_h: float
    min_alpha: float
    min_distance: float
    max_lateral_deviation: float
    target_reached: Optional[bool] = None
    final_position: Tuple[float, ...]
    mean_solve_time: float
    max_solve_time: float
    mean_step_time: float
    fallback_ticks: int
    emergency_ticks: int
    hard_failures: int
    unsolved_ticks: int = 0
    h_negative_interval: Optional[Tuple[float, float]] = None

    @property
    def safe(self) -> bool:
        return self.unsolved_ticks == 0 and self.min_alpha >= 1.0

    @property
    def exit_code(self) -> int:
        if self.hard_failures > 0:
            return 3
        return 0 if self.safe else 2


def _line_deviation(points: np.ndarray, start: np.ndarray, target: Optional[np.ndarray]) -> np.ndarray:
    if target is None or np.linalg.norm(target - start) < 1e-12:
        # no target: deviation from the start position across the first axis
        return np.linalg.norm(points[:, 1:] - start[1:], axis=1)
    direction = (target - start) / np.linalg.norm(target - start)
    offsets = points - start
    along = offsets @ direction
    return np.linalg.norm(offsets - along[:, None] * direction, axis=1)


def metrics(trace: Trace) -> RunSummary:
    """Safety, tracking and timing summary of a finished run."""
    if not trace.records:
        raise ParameterError("Cannot summarize an empty trace")
    scenario = trace.scenario
    frame = trace.to_frame()
    robot = build_robot(scenario.robot)
    positions = np.array([robot.position(np.asarray(r.state)) for r in trace.records])
    m = positions.shape[1]
    start = positions[0]
    target = None if scenario.target is None else np.asarray(scenario.target, dtype=float)[:m]

    h = np.array([r.h for r in trace.records], dtype=float)
    alpha = np.array([r.alpha for r in trace.records], dtype=float)
    distance = np.array([r.distance for r in trace.records], dtype=float)
    min_h_per_tick = np.min(h, axis=1) if h.size else np.full(len(trace.records), np.inf)
    # a tick whose ground-truth α* is unknown cannot be certified safe
    unsolved = ~np.all(np.isfinite(alpha), axis=1) if alpha.size else np.zeros(len(trace.records), dtype=bool)
    controller_failures = (frame["status"] == "HardFailure").to_numpy()
    negative = np.flatnonzero(min_h_per_tick < 0.0)

    final_state = np.asarray(trace.records[-1].state) + scenario.dt * np.asarray(trace.records[-1].u)
    final_position = robot.position(final_state)
    target_reached = None
    if target is not None:
        reached = np.linalg.norm(np.vstack([positions, final_position]) - target, axis=1) <= scenario.target_tolerance
        target_reached = bool(np.any(reached))

    return RunSummary(
        scenario=scenario.name,
        controller=scenario.controller.kind,
        ticks=len(trace.records),
        min_h=float(np.nanmin(h)) if h.size else float("inf"),
        min_alpha=float(np.nanmin(alpha)) if alpha.size else float("inf"),
        min_distance=float(np.min(distance)) if distance.size else float("inf"),
        max_lateral_deviation=float(np.max(_line_deviation(positions, start, target))),
        target_reached=target_reached,
        final_position=tuple(float(v) for v in final_position),
        mean_solve_time=float(frame["solve_time"].mean()),
        max_solve_time=float(frame["solve_time"].max()),
        mean_step_time=float(frame["step_time"].mean()),
        fallback_ticks=int(frame["fallback"].sum()),
        emergency_ticks=int((frame["status"] == "Emergency").sum()),
        hard_failures=int(np.sum(controller_failures | unsolved)),
        unsolved_ticks=int(np.sum(unsolved)),
        h_negative_interval=None if negative.size == 0 else (
            trace.records[negative[0]].t, trace.records[negative[-1]].t
        ),
    )
