import pytest
import sys
import os

import numpy as np

sys.path.append(os.path.join(os.path.dirname(__file__), "..", "src"))

from control import ControlBox, MpcConfig, mpc_baseline
from control.controllers import ControlContext, MpcController, ObstacleEstimate, RobotSegment
from geometry.primitives import Pose, Sphere
from utils.errors import ParameterError

BOX = ControlBox.symmetric(1.0, 2)


def _prediction(start, velocity, cfg):
    t = np.arange(cfg.steps + 1) * cfg.sample_time
    return np.asarray(start, dtype=float)[None, :] + t[:, None] * np.asarray(velocity, dtype=float)[None, :]


def test_config_defaults_and_steps():
    cfg = MpcConfig()
    assert cfg.steps == 30
    assert (cfg.d_risk, cfg.d_obs, cfg.w_target, cfg.w_effort, cfg.w_avoid) == (1.5, 1.5, 0.1, 0.1, 10.0)


def test_horizon_must_be_whole_number_of_samples():
    with pytest.raises(ValueError):
        MpcConfig(horizon=1.52, sample_time=0.05)


def test_far_obstacle_adds_no_constraints():
    cfg = MpcConfig()
    result = mpc_baseline([0.0, 0.0], [20.0, 0.0], _prediction([100.0, 0.0, 0.0], [0.0, 0.0, 0.0], cfg), cfg, BOX)
    assert result.active_constraints == 0
    assert result.plan.shape == (30, 2)
    assert np.allclose(result.u, [1.0, 0.0], atol=1e-3)


def test_without_avoidance_weight_heads_to_target():
    cfg = MpcConfig(w_avoid=0.0)
    result = mpc_baseline([0.0, -0.5], [20.0, -0.5], _prediction([4.0, 0.0, 0.0], [-4.0, 0.0, 0.0], cfg), cfg, BOX)
    assert result.u[0] > 0.0


def test_head_on_obstacle_pushes_sideways():
    cfg = MpcConfig()
    result = mpc_baseline([0.0, -0.5], [20.0, -0.5], _prediction([4.0, 0.0, 0.0], [-4.0, 0.0, 0.0], cfg), cfg, BOX)
    assert result.active_constraints > 0
    assert result.u[1] < 0.0
    assert BOX.contains(result.u, 1e-9)


def test_prediction_length_checked():
    cfg = MpcConfig()
    with pytest.raises(ParameterError):
        mpc_baseline([0.0, 0.0], [1.0, 0.0], np.zeros((5, 3)), cfg, BOX)
    with pytest.raises(ParameterError):
        mpc_baseline([0.0, 0.0, 0.0], [1.0, 0.0, 0.0], np.zeros((31, 3)), cfg, BOX)


def _context(target):
    J_v = np.zeros((3, 2))
    J_v[:2, :2] = np.eye(2)
    return ControlContext(
        t=0.0,
        state=np.array([0.0, -0.5]),
        position=np.array([0.0, -0.5]),
        segments=[RobotSegment(
            index=0, primitive=Sphere(radius=0.5), pose=Pose.planar(0.0, -0.5), velocity=np.zeros(3),
            position_jacobian=J_v, orientation_jacobian=np.zeros((3, 2)),
        )],
        obstacles=[ObstacleEstimate(
            index=0, primitive=Sphere(radius=1.0), pose=Pose.planar(4.0, 0.0), velocity=np.array([-4.0, 0.0, 0.0]),
            predicted_pose=Pose.planar(3.96, 0.0),
        )],
        u_ref=np.zeros(2),
        drift=np.zeros(2),
        actuation=np.eye(2),
        target=target,
    )


def test_controller_keeps_plan_between_ticks():
    controller = MpcController(MpcConfig(), BOX)
    output = controller.compute(_context(np.array([20.0, -0.5])))
    assert output.status == "Optimal"
    assert controller._plan.shape == (30, 2)
    controller.reset()
    assert controller._plan is None


def test_controller_needs_target():
    with pytest.raises(ParameterError):
        MpcController(MpcConfig(), BOX).compute(_context(None))
