import pytest
import sys
import os
from itertools import combinations

import numpy as np

sys.path.append(os.path.join(os.path.dirname(__file__), "..", "src"))

from cbf.barrier import ConstraintRow
from cbf.config import CbfConfig
from control import (
    ControlBox,
    ControllerFactory,
    ControllerSpec,
    MpcConfig,
    QpStatus,
    QpWorkspace,
    ReferenceSpec,
    fallback_control,
    pd_reference,
    proportional_reference,
    tvcbf_qp,
)
from control.controllers import ControlContext, MpcController, ObstacleEstimate, RobotSegment, TvcbfController
from geometry.primitives import Pose, Sphere
from utils.errors import ParameterError


def _row(a, c, emergency=False, obstacle_index=0):
    return ConstraintRow(
        a=np.asarray(a, dtype=float), c=float(c), robot_index=0, obstacle_index=obstacle_index, h=1.0, dhdt=0.0,
        alpha_star=2.0, emergency=emergency,
    )


def _projection_oracle(u_ref, rows, box):
    """Dense active-set enumeration of min ‖u − u_ref‖² over rows and box faces."""
    m = u_ref.size
    G = [row.a for row in rows] + list(np.eye(m)) + list(-np.eye(m))
    g = [row.c for row in rows] + list(box.lo) + list(-box.hi)
    G, g = np.array(G), np.array(g)
    best, best_dist = None, np.inf
    for size in range(m + 1):
        for subset in combinations(range(len(g)), size):
            idx = list(subset)
            if size == 0:
                u = u_ref.copy()
            else:
                Gs = G[idx]
                if np.linalg.matrix_rank(Gs) < size:
                    continue
                lam = np.linalg.solve(Gs @ Gs.T, g[idx] - Gs @ u_ref)
                u = u_ref + Gs.T @ lam
            if np.all(G @ u >= g - 1e-9):
                dist = np.linalg.norm(u - u_ref)
                if dist < best_dist:
                    best, best_dist = u, dist
    return best


# --- control box ---

def test_control_box():
    box = ControlBox.symmetric(1.0, 2)
    assert box.dims == 2
    assert np.allclose(box.clip([3.0, -0.5]), [1.0, -0.5])
    assert box.contains([1.0, -1.0])
    assert not box.contains([1.1, 0.0])
    with pytest.raises(ValueError):
        ControlBox(lower=(1.0, 0.0), upper=(0.0, 1.0))
    with pytest.raises(ValueError):
        ControlBox(lower=(0.0,), upper=(1.0, 1.0))


# --- safety filter QP ---

def test_no_rows_returns_reference():
    box = ControlBox.symmetric(10.0, 2)
    result = tvcbf_qp([2.0, 0.0], [], box)
    assert result.status == QpStatus.OPTIMAL
    assert np.array_equal(result.u, [2.0, 0.0])


def test_no_rows_clips_reference():
    result = tvcbf_qp([20.0, -3.0], [], ControlBox.symmetric(10.0, 2))
    assert np.allclose(result.u, [10.0, -3.0])


def test_feasible_reference_returned_exactly():
    u_ref = np.array([0.123456789, -0.987654321])
    result = tvcbf_qp(u_ref, [_row([1.0, 0.0], -5.0), _row([0.3, 0.7], -1.0)], ControlBox.symmetric(1.0, 2))
    assert result.status == QpStatus.OPTIMAL
    assert np.array_equal(result.u, u_ref)
    assert result.active_rows == ()


def test_single_halfspace_projection():
    result = tvcbf_qp([-2.0, 0.0], [_row([1.0, 0.0], 0.0)], ControlBox.symmetric(10.0, 2))
    assert result.status == QpStatus.OPTIMAL
    assert np.allclose(result.u, [0.0, 0.0], atol=1e-7)
    assert result.active_rows == (0,)


def test_contradictory_rows_are_infeasible():
    rows = [_row([1.0, 0.0], 1.0), _row([-1.0, 0.0], 1.0)]
    result = tvcbf_qp([0.0, 0.0], rows, ControlBox.symmetric(10.0, 2))
    assert result.status == QpStatus.INFEASIBLE
    assert result.u is None


def test_projection_matches_active_set_enumeration():
    rng = np.random.default_rng(0)
    box = ControlBox.symmetric(2.0, 2)
    workspace = QpWorkspace()
    for _ in range(100):
        n_rows = int(rng.integers(1, 4))
        u_feasible = rng.uniform(-1.5, 1.5, 2)
        rows = []
        for _ in range(n_rows):
            a = rng.normal(size=2)
            rows.append(_row(a, a @ u_feasible - rng.uniform(0.0, 0.5)))
        u_ref = rng.uniform(-4.0, 4.0, 2)
        result = tvcbf_qp(u_ref, rows, box, workspace)
        assert result.status == QpStatus.OPTIMAL
        assert np.allclose(result.u, _projection_oracle(u_ref, rows, box), atol=1e-6)
        assert box.contains(result.u, 1e-9)
        assert all(row.a @ result.u >= row.c - 1e-7 for row in rows)


def test_complementary_slackness():
    rows = [_row([1.0, 0.0], 0.5), _row([0.0, 1.0], -5.0)]
    result = tvcbf_qp([-1.0, 0.0], rows, ControlBox.symmetric(10.0, 2))
    assert result.active_rows == (0,)
    assert result.duals[0] > 0.0
    assert result.duals[1] == pytest.approx(0.0, abs=1e-7)


def test_workspace_reused_across_ticks():
    workspace = QpWorkspace()
    box = ControlBox.symmetric(10.0, 2)
    first = tvcbf_qp([-2.0, 0.0], [_row([1.0, 0.0], 0.0)], box, workspace)
    solver = workspace._solver
    second = tvcbf_qp([0.0, -3.0], [_row([0.0, 1.0], -1.0)], box, workspace)
    assert workspace._solver is solver
    assert np.allclose(first.u, [0.0, 0.0], atol=1e-7)
    assert np.allclose(second.u, [0.0, -1.0], atol=1e-7)


def test_workspace_rebuilt_when_pair_set_changes():
    workspace = QpWorkspace()
    box = ControlBox.symmetric(10.0, 2)
    tvcbf_qp([-2.0, 0.0], [_row([1.0, 0.0], 0.0, obstacle_index=0)], box, workspace)
    solver = workspace._solver
    # same shape, different obstacle
    result = tvcbf_qp([-2.0, 0.0], [_row([1.0, 0.0], 0.0, obstacle_index=1)], box, workspace)
    assert workspace._solver is not solver
    assert np.allclose(result.u, [0.0, 0.0], atol=1e-7)


def test_emergency_rows_are_not_constraints():
    result = tvcbf_qp([1.0, 1.0], [_row([0.0, 0.0], 0.0, emergency=True)], ControlBox.symmetric(2.0, 2))
    assert np.array_equal(result.u, [1.0, 1.0])


def test_reference_size_checked():
    with pytest.raises(ParameterError):
        tvcbf_qp([1.0, 1.0, 1.0], [], ControlBox.symmetric(2.0, 2))


def test_fallback_maximizes_most_violated_row():
    box = ControlBox(lower=(-1.0, -2.0, -3.0), upper=(1.0, 2.0, 3.0))
    rows = [_row([1.0, -1.0, 0.0], 10.0), _row([0.0, 1.0, 0.0], -100.0)]
    u = fallback_control([0.5, 0.5, 7.0], rows, box)
    assert np.allclose(u, [1.0, -2.0, 3.0])
    assert np.allclose(fallback_control([5.0, 0.0, 0.0], [], box), [1.0, 0.0, 0.0])


# --- reference laws ---

def test_proportional_reference():
    assert np.allclose(proportional_reference([-5.0, -0.5], [20.0, -0.5], 2.0), [50.0, 0.0])
    assert np.allclose(proportional_reference([1.0, 2.0], [1.0, 2.0], 2.0), 0.0)
    assert np.allclose(proportional_reference([-5.0, -0.5], [20.0, -0.5], 0.0), 0.0)
    with pytest.raises(ParameterError):
        proportional_reference([0.0], [1.0], -1.0)


def test_pd_reference():
    assert np.allclose(pd_reference([0.3, 0.2], [0.3, 0.2], [0.0, 0.0], 2.0, 0.1), 0.0)
    assert np.allclose(pd_reference([0.0], [2.0], [1.0], 1.0, 1.0), [1.0])
    q, target = np.array([0.1, -0.4]), np.array([1.0, 0.5])
    assert np.allclose(pd_reference(q, target, [3.0, 3.0], [2.0, 0.5], 0.0), proportional_reference(q, target, [2.0, 0.5]))


def test_reference_spec_kinds():
    x = np.array([-5.0, -0.5])
    assert np.allclose(ReferenceSpec(kind="constant", value=(2.0, 0.0)).evaluate(x, None, x, np.zeros(2)), [2.0, 0.0])
    prop = ReferenceSpec(kind="proportional", kp=2.0)
    assert np.allclose(prop.evaluate(x, np.array([20.0, -0.5, 0.0]), x, np.zeros(2)), [50.0, 0.0])
    with pytest.raises(ParameterError):
        prop.evaluate(x, None, x, np.zeros(2))
    pd = ReferenceSpec(kind="pd", kp=1.0, kd=1.0, nominal=(2.0,))
    assert np.allclose(pd.evaluate(np.zeros(1), None, np.zeros(1), np.ones(1)), [1.0])


# --- controllers ---

def _context(obstacle_position, u_ref=(2.0, 0.0)):
    J_v = np.zeros((3, 2))
    J_v[:2, :2] = np.eye(2)
    robot_pose = Pose(position=(-5.0, -0.5, 0.0))
    obstacle = np.asarray(obstacle_position, dtype=float)
    velocity = np.array([-4.0, 0.0, 0.0])
    return ControlContext(
        t=0.0,
        state=np.array([-5.0, -0.5]),
        position=np.array([-5.0, -0.5]),
        segments=[RobotSegment(
            index=0, primitive=Sphere(radius=0.5), pose=robot_pose, velocity=np.zeros(3),
            position_jacobian=J_v, orientation_jacobian=np.zeros((3, 2)),
        )],
        obstacles=[ObstacleEstimate(
            index=0, primitive=Sphere(radius=1.5), pose=Pose.from_arrays(obstacle), velocity=velocity,
            predicted_pose=Pose.from_arrays(obstacle + 0.01 * velocity),
        )],
        u_ref=np.asarray(u_ref, dtype=float),
        drift=np.zeros(2),
        actuation=np.eye(2),
        target=np.array([20.0, -0.5]),
    )


def test_tvcbf_controller_passes_reference_when_far():
    controller = TvcbfController(CbfConfig(), ControlBox.symmetric(20.0, 2))
    output = controller.compute(_context((5.0, 0.0, 0.0)))
    assert output.status == "Optimal"
    assert np.array_equal(output.u, [2.0, 0.0])
    assert len(output.rows) == 1 and not output.fallback


def test_tvcbf_controller_modifies_reference_near_contact():
    controller = TvcbfController(CbfConfig(), ControlBox.symmetric(20.0, 2))
    output = controller.compute(_context((-2.8, -0.3, 0.0)))
    assert output.status == "Optimal"
    row = output.rows[0]
    assert row.a @ output.u >= row.c - 1e-7
    assert not np.allclose(output.u, [2.0, 0.0])


def test_tvcbf_controller_emergency_stop():
    controller = TvcbfController(CbfConfig(), ControlBox.symmetric(20.0, 2))
    output = controller.compute(_context((-5.0, -0.5, 0.0)))
    assert output.status == "Emergency"
    assert np.allclose(output.u, 0.0)


def test_tvcbf_controller_falls_back_when_infeasible():
    # the obstacle closes faster than a 0.1 m/s box lets the robot escape
    controller = TvcbfController(CbfConfig(), ControlBox.symmetric(0.1, 2))
    output = controller.compute(_context((-3.0, -0.5, 0.0)))
    assert output.fallback
    assert output.status == "Infeasible"
    assert output.u[0] == pytest.approx(-0.1)
    assert abs(output.u[1]) <= 0.1


def test_factory_creates_controllers():
    box = ControlBox.symmetric(1.0, 2)
    reference = ReferenceSpec(kind="proportional", kp=2.0)
    assert isinstance(ControllerFactory.create_controller(ControllerSpec(box=box, reference=reference)), TvcbfController)
    mpc = ControllerSpec(kind="mpc", box=box, reference=reference, mpc=MpcConfig())
    assert isinstance(ControllerFactory.create_controller(mpc), MpcController)
    with pytest.raises(ValueError):
        ControllerSpec(kind="mpc", box=box, reference=reference)


def test_factory_rejects_unknown_kind():
    # model_construct skips validation, as a hand-built spec would
    spec = ControllerSpec.model_construct(
        kind="bogus", box=ControlBox.symmetric(1.0, 2), reference=ReferenceSpec(), cbf=CbfConfig(), mpc=None,
    )
    with pytest.raises(ParameterError):
        ControllerFactory.create_controller(spec)
