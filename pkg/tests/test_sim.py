import pytest
import sys
import os
from unittest.mock import patch

import numpy as np

sys.path.append(os.path.join(os.path.dirname(__file__), "..", "src"))

from control import ControlBox, ControllerSpec, ReferenceSpec
from geometry.primitives import Pose, Sphere
from geometry.scaling import ScalingSolution, ScalingStatus, min_scaling
from sim import (
    ObstacleScript,
    RobotSpec,
    Scenario,
    Simulation,
    VelocitySegment,
    builtin_scenarios,
    get_scenario,
    metrics,
    run,
    run_batch,
    seed_sweep,
)
from sim.robots import build_robot
from utils import rotations
from utils.errors import ParameterError, ScalingFailure, ScenarioError


def _one_sphere(velocity=(0.0, 0.0, 0.0), u=(0.0, 0.0), obstacle=(5.0, 0.0, 0.0), duration=1.0):
    return Scenario(
        name="one_sphere",
        robot=RobotSpec(primitives=[Sphere(radius=0.5)], initial_state=(-5.0, -0.5)),
        obstacles=[ObstacleScript(
            primitive=Sphere(radius=1.5),
            initial_pose=Pose(position=obstacle),
            profile=[VelocitySegment(velocity=velocity)],
        )],
        controller=ControllerSpec(
            box=ControlBox.symmetric(20.0, 2),
            reference=ReferenceSpec(kind="constant", value=u),
        ),
        duration=duration,
    )


# --- scripts and robots ---

def test_constant_velocity_script_is_exact():
    script = get_scenario("moving_circles").obstacles[0]
    for k in range(0, 1200, 37):
        t = 0.01 * k
        assert np.max(np.abs(script.pose_at(t).r - np.array([5.0 - 4.0 * t, 0.0, 0.0]))) < 1e-12


def test_piecewise_script_stops_and_rotates():
    script = get_scenario("planar_arm_two_boxes").obstacles[1]
    assert np.allclose(script.pose_at(1.0).r, [0.6, -0.6, 0.0])
    assert np.allclose(script.pose_at(3.0).r, [0.6, -0.4, 0.0])
    assert np.allclose(rotations.log(script.pose_at(1.0).q), [0.0, 0.0, 0.5], atol=1e-12)
    assert np.allclose(script.velocity_at(2.5), 0.0)


def test_profile_must_start_at_zero():
    with pytest.raises(ValueError):
        ObstacleScript(primitive=Sphere(radius=1.0), initial_pose=Pose(), profile=[VelocitySegment(start_time=1.0)])


def test_arm_jacobians_match_finite_differences():
    robot = build_robot(get_scenario("planar_arm_box").robot)
    x = np.array([0.2, -0.4, 0.7])
    eps = 1e-6
    for i, (J_v, J_w) in enumerate(robot.segment_jacobians(x)):
        for k in range(3):
            dx = np.zeros(3)
            dx[k] = eps
            fd = (robot.segment_poses(x + dx)[i].r - robot.segment_poses(x - dx)[i].r) / (2 * eps)
            assert np.allclose(J_v[:, k], fd, atol=1e-8)
            assert np.allclose(J_w[:, k], [0.0, 0.0, 1.0] if k <= i else 0.0)


def test_arm_capsules_follow_links():
    robot = build_robot(get_scenario("planar_arm_box").robot)
    poses = robot.segment_poses(np.zeros(3))
    # links along world x: capsule axis (body z) maps onto x
    assert np.allclose(poses[0].R @ [0.0, 0.0, 1.0], [1.0, 0.0, 0.0], atol=1e-12)
    assert np.allclose([p.r[0] for p in poses], [0.25, 0.7, 1.05])
    assert np.allclose(robot.position(np.zeros(3)), [1.2, 0.0, 0.0])


# --- stepping ---

def test_zero_command_leaves_state_unchanged():
    sim = Simulation(_one_sphere())
    record = sim.step()
    assert np.array_equal(sim.x, [-5.0, -0.5])
    assert record.u == [0.0, 0.0]


def test_euler_step():
    sim = Simulation(_one_sphere(u=(2.0, 0.0)))
    sim.step()
    assert sim.x[0] == pytest.approx(-4.98)
    assert sim.x[1] == pytest.approx(-0.5)


def test_filter_inactive_on_first_tick():
    record = Simulation(get_scenario("moving_circles")).step()
    assert record.u == [2.0, 0.0]
    assert record.status == "Optimal"
    assert record.alpha[0] == pytest.approx(np.hypot(10.0, 0.5) / 2.0)


def test_zero_duration_gives_empty_trace():
    trace = run(_one_sphere(duration=0.0))
    assert trace.records == []
    with pytest.raises(ParameterError):
        metrics(trace)


def test_unsafe_start_is_rejected():
    with pytest.raises(ScenarioError):
        run(_one_sphere(obstacle=(-4.0, -0.5, 0.0)))


def _unsolved():
    return ScalingSolution(alpha_star=float("nan"), p_star=np.full(3, np.nan), status=ScalingStatus.MAX_ITER)


def test_unsolved_ground_truth_tick_is_a_hard_failure():
    calls = []

    def third_tick_fails(*args, **kwargs):
        # call 0 is the start check, calls 1.. are one per tick
        calls.append(1)
        return _unsolved() if len(calls) == 4 else min_scaling(*args, **kwargs)

    with patch("sim.engine.min_scaling", side_effect=third_tick_fails):
        trace = run(_one_sphere(duration=0.05))
    assert len(trace.records) == 5
    assert np.isnan(trace.records[2].alpha[0])
    summary = metrics(trace)
    assert summary.unsolved_ticks == 1
    assert summary.hard_failures == 1
    assert not summary.safe
    assert summary.exit_code == 3
    assert np.isfinite(summary.min_alpha)


def test_unsolved_start_raises_solver_failure():
    with patch("sim.engine.min_scaling", return_value=_unsolved()):
        with pytest.raises(ScalingFailure):
            run(_one_sphere())


def test_scenario_rejects_box_mismatch():
    data = _one_sphere().model_dump()
    data["controller"]["box"] = {"lower": [-1.0] * 3, "upper": [1.0] * 3}
    with pytest.raises(ValueError):
        Scenario.model_validate(data)


# --- registry ---

def test_builtin_scenarios():
    scenarios = builtin_scenarios()
    assert set(scenarios) == {
        "moving_circles",
        "moving_circles_noisy",
        "moving_circles_actuation",
        "moving_circles_saturated",
        "moving_rectangle",
        "moving_rectangle_mpc",
        "planar_arm_box",
        "planar_arm_two_boxes",
    }
    circles = scenarios["moving_circles"]
    assert circles.robot.primitives[0].radius == 0.5
    assert circles.obstacles[0].primitive.radius == 1.5
    assert circles.controller.cbf.gamma == 1.0 and circles.controller.cbf.beta == 1.03
    noisy = scenarios["moving_circles_noisy"]
    assert noisy.noise.position_variance == 0.5 and noisy.controller.cbf.k == 3.0
    mpc = scenarios["moving_rectangle_mpc"].controller.mpc
    assert (mpc.horizon, mpc.sample_time, mpc.d_risk, mpc.d_obs) == (1.5, 0.05, 1.5, 1.5)
    assert (mpc.w_target, mpc.w_effort, mpc.w_avoid) == (0.1, 0.1, 10.0)


def test_unknown_scenario():
    with pytest.raises(ScenarioError):
        get_scenario("nope")


# --- runs ---

def test_moving_circles_is_safe_and_passes():
    trace = run(get_scenario("moving_circles"))
    summary = metrics(trace)
    assert summary.safe
    assert summary.exit_code == 0
    assert summary.final_position[0] > 5.0
    # scaling certificate agrees with the distance oracle
    assert all(d >= -1e-9 for r in trace.records for d in r.distance)


def test_static_barrier_collides():
    scenario = get_scenario("moving_circles").with_overrides(time_varying=False, duration=4.0)
    summary = metrics(run(scenario))
    assert summary.min_alpha < 1.0
    assert summary.exit_code == 2


def test_halving_dt_barely_moves_min_alpha():
    scenario = get_scenario("moving_circles").with_overrides(duration=4.0)
    coarse = metrics(run(scenario)).min_alpha
    fine = metrics(run(scenario.with_overrides(dt=0.005))).min_alpha
    assert abs(fine - coarse) / coarse < 0.05


def test_runs_are_deterministic():
    scenario = get_scenario("moving_circles_noisy").with_overrides(duration=1.0, seed=7)
    first, second = run(scenario), run(scenario)
    for a, b in zip(first.records, second.records):
        assert (a.state, a.u, a.alpha, a.status) == (b.state, b.u, b.alpha, b.status)


def test_inflated_barrier_with_tight_box():
    scenario = get_scenario("moving_circles_actuation")
    inflated = metrics(run(scenario))
    plain = metrics(run(scenario.with_overrides(b=0.0, actuation_inflated=False)))
    assert inflated.safe
    assert plain.min_h < inflated.min_h


def test_limit_unaware_filter_leaves_safe_set_near_crossing():
    summary = metrics(run(get_scenario("moving_circles_saturated")))
    assert summary.min_h < 0.0
    start, end = summary.h_negative_interval
    assert start <= 2.9 and end >= 2.1


def test_actuator_saturates_and_lags():
    scenario = get_scenario("moving_circles_saturated")
    sim = Simulation(scenario)
    first = sim.realize(np.array([20.0, -0.5]))
    assert first == pytest.approx([1.0, -0.05])
    sim.last_u = np.array([0.5, 0.0])
    assert sim.realize(np.array([0.5, 0.0])) == pytest.approx([0.5, 0.0])
    assert Simulation(get_scenario("moving_circles")).realize(np.array([20.0, -0.5])) == pytest.approx([20.0, -0.5])


def test_sensor_period_limits_measurements():
    scenario = get_scenario("moving_circles_noisy").with_overrides(duration=0.5)
    sim = Simulation(scenario)
    seen = []
    for _ in range(scenario.steps):
        sim.step()
        seen.append(sim.trackers[0].last_time)
    # 5 Hz sensor on a 100 Hz loop
    assert sorted(set(seen)) == pytest.approx([0.0, 0.2, 0.4])


def test_noise_robust_barrier_over_seeds():
    scenario = get_scenario("moving_circles_noisy")
    traces = run_batch(seed_sweep(scenario, range(20)))
    assert [t.scenario.seed for t in traces] == list(range(20))
    assert all(metrics(t).safe for t in traces)


def test_noise_ignoring_barrier_fails_for_some_seed():
    scenario = get_scenario("moving_circles_noisy").with_overrides(noise_robust=False, duration=3.0)
    traces = run_batch(seed_sweep(scenario, range(20)))
    violated = [
        t.scenario.seed for t in traces
        if any(min(r.alpha) < 1.0 and 1.5 <= r.t <= 2.5 for r in t.records)
    ]
    assert violated


def test_batch_matches_sequential_runs():
    scenarios = seed_sweep(get_scenario("moving_circles_noisy").with_overrides(duration=0.5), [3, 4])
    parallel = run_batch(scenarios, max_workers=2)
    for scenario, trace in zip(scenarios, parallel):
        assert [r.state for r in trace.records] == [r.state for r in run(scenario).records]


@pytest.fixture(scope="module")
def rectangle_summaries():
    return metrics(run(get_scenario("moving_rectangle"))), metrics(run(get_scenario("moving_rectangle_mpc")))


def test_rectangle_both_controllers_reach_target_safely(rectangle_summaries):
    for summary in rectangle_summaries:
        assert summary.safe
        assert summary.target_reached


def test_rectangle_filter_deviates_less_than_mpc(rectangle_summaries):
    tvcbf, mpc = rectangle_summaries
    assert tvcbf.max_lateral_deviation < mpc.max_lateral_deviation
    assert tvcbf.mean_step_time <= mpc.mean_step_time / 3.0


@pytest.mark.parametrize("name", ["planar_arm_box", "planar_arm_two_boxes"])
def test_arm_scenarios_stay_safe(name):
    summary = metrics(run(get_scenario(name)))
    assert summary.safe
    assert summary.hard_failures == 0
    assert summary.max_solve_time < 5e-3
