import time

import numpy as np

from cbf.barrier import assemble_rows
from cbf.config import CbfConfig
from cbf.pair import BodyPairState
from control.qp import ControlBox, QpStatus, QpWorkspace, fallback_control, tvcbf_qp
from utils.errors import ScalingFailure
from utils.tracer import tracer
from .base import ControlContext, ControlOutput, Controller


class TvcbfController(Controller):
    """Safety filter over every (robot segment, obstacle) pair."""

    def __init__(self, cfg: CbfConfig, box: ControlBox):
        self.cfg = cfg
        self.box = box
        self.workspace = QpWorkspace()

    def reset(self):
        self.workspace = QpWorkspace()

    def pairs(self, context: ControlContext):
        n_r, n_o = len(context.segments), len(context.obstacles)
        return [
            BodyPairState(
                robot_index=seg.index,
                obstacle_index=obs.index,
                n_robot=n_r,
                n_obstacles=n_o,
                robot_primitive=seg.primitive,
                robot_pose=seg.pose,
                robot_velocity=seg.velocity,
                obstacle_primitive=obs.primitive,
                obstacle_pose=obs.pose,
                obstacle_velocity=obs.velocity,
                predicted_obstacle_pose=obs.predicted_pose,
                position_covariance=obs.position_covariance,
                predicted_position_covariance=obs.predicted_position_covariance,
                position_jacobian=seg.position_jacobian,
                orientation_jacobian=seg.orientation_jacobian,
            )
            for seg in context.segments
            for obs in context.obstacles
        ]

    def compute(self, context: ControlContext) -> ControlOutput:
        stop = self.box.clip(np.zeros(self.box.dims))
        u_limit = np.maximum(np.abs(self.box.lo), np.abs(self.box.hi))
        try:
            rows, pruned = assemble_rows(self.pairs(context), self.cfg, context.drift, context.actuation, u_limit)
        except ScalingFailure as e:
            tracer.log_event("hard_failure", {"t": context.t, "error": str(e)})
            return ControlOutput(u=stop, status="HardFailure")

        if any(row.emergency for row in rows):
            return ControlOutput(u=stop, status="Emergency", rows=tuple(rows), pruned=pruned)

        start = time.perf_counter()
        result = tvcbf_qp(context.u_ref, rows, self.box, self.workspace)
        if result.status == QpStatus.OPTIMAL:
            return ControlOutput(
                u=result.u, status=result.status.value, solve_time=result.solve_time, rows=tuple(rows), pruned=pruned
            )

        u = fallback_control(context.u_ref, rows, self.box)
        return ControlOutput(
            u=u,
            status=result.status.value,
            solve_time=time.perf_counter() - start,
            rows=tuple(rows),
            pruned=pruned,
            fallback=True,
        )
