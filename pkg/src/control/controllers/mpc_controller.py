from typing import Optional

import numpy as np

from control.mpc import MpcConfig, mpc_baseline
from control.qp import ControlBox
from utils.errors import ControllerFailure, ParameterError
from utils.tracer import tracer
from .base import ControlContext, ControlOutput, Controller


class MpcController(Controller):
    """Receding-horizon baseline; obstacles are extrapolated at constant velocity."""

    def __init__(self, cfg: MpcConfig, box: ControlBox):
        self.cfg = cfg
        self.box = box
        self._plan: Optional[np.ndarray] = None
        self._solution: Optional[np.ndarray] = None

    def reset(self):
        self._plan = None
        self._solution = None

    def compute(self, context: ControlContext) -> ControlOutput:
        if context.target is None:
            raise ParameterError("MPC baseline needs a target position")
        steps = np.arange(self.cfg.steps + 1) * self.cfg.sample_time
        prediction = np.zeros((len(context.obstacles), steps.size, 3))
        for i, obs in enumerate(context.obstacles):
            prediction[i] = obs.pose.r[None, :] + steps[:, None] * obs.velocity[None, :]

        try:
            result = mpc_baseline(
                context.position,
                context.target,
                prediction,
                self.cfg,
                self.box,
                previous_plan=self._plan,
                warm_start=self._solution,
            )
        except ControllerFailure as e:
            tracer.log_event("hard_failure", {"t": context.t, "error": str(e)})
            self.reset()
            return ControlOutput(u=self.box.clip(np.zeros(self.box.dims)), status="HardFailure")

        self._plan = result.plan
        self._solution = result.solution
        return ControlOutput(u=result.u, status="Optimal", solve_time=result.solve_time)
