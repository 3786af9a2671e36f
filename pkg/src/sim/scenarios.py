"""Built-in scenario registry."""
from typing import Callable, Dict

from cbf.config import CbfConfig
from control.factory import ControllerSpec
from control.mpc import MpcConfig
from control.qp import ControlBox
from control.reference import ReferenceSpec
from estimation.belief import EkfSettings
from geometry.primitives import Capsule, Polytope, Pose, Sphere
from utils.errors import ScenarioError
from .scenario import NoiseSpec, ObstacleScript, RobotSpec, Scenario, VelocitySegment

ROBOT_RADIUS = 0.5
CIRCLE_RADIUS = 1.5
RECTANGLE_SIZE = (3.0, 0.4, 2.0)
ARM_LINKS = (0.5, 0.4, 0.3)
ARM_LINK_RADIUS = 0.05
ARM_HOME = (0.0, 0.3, 0.3)


def _circle_robot() -> RobotSpec:
    return RobotSpec(kind="planar_integrator", primitives=[Sphere(radius=ROBOT_RADIUS)], initial_state=(-5.0, -0.5))


def _circle_obstacle() -> ObstacleScript:
    return ObstacleScript(
        name="circle",
        primitive=Sphere(radius=CIRCLE_RADIUS),
        initial_pose=Pose(position=(5.0, 0.0, 0.0)),
        profile=[VelocitySegment(velocity=(-4.0, 0.0, 0.0))],
    )


def moving_circles() -> Scenario:
    return Scenario(
        name="moving_circles",
        description="Sphere robot vs. circle obstacle closing head-on at 4 m/s",
        robot=_circle_robot(),
        obstacles=[_circle_obstacle()],
        controller=ControllerSpec(
            box=ControlBox.symmetric(20.0, 2),
            reference=ReferenceSpec(kind="constant", value=(2.0, 0.0)),
            cbf=CbfConfig(gamma=1.0, beta=1.03),
        ),
        duration=12.0,
    )


def moving_circles_noisy() -> Scenario:
    base = moving_circles()
    return base.model_copy(update={
        "name": "moving_circles_noisy",
        "description": "Moving circles with 5 Hz N(0, 0.5) position measurements, EKF and k = 3 worst-case barrier",
        "noise": NoiseSpec(
            position_variance=0.5,
            measurement_period=0.2,
            ekf=EkfSettings(acceleration_density=0.1, initial_velocity_variance=16.0),
        ),
        "controller": base.controller.model_copy(update={
            "cbf": CbfConfig(gamma=1.0, beta=1.03, k=3.0, noise_robust=True),
        }),
        "duration": 6.0,
    })


def moving_circles_actuation() -> Scenario:
    base = moving_circles()
    return base.model_copy(update={
        "name": "moving_circles_actuation",
        "description": "Moving circles on a ±1 m/s actuator with a matching velocity box and inflated barrier (b = 1)",
        "robot": base.robot.model_copy(update={"velocity_limit": 1.0}),
        "controller": base.controller.model_copy(update={
            "box": ControlBox.symmetric(1.0, 2),
            "cbf": CbfConfig(gamma=1.0, beta=1.03, b=1.0, actuation_inflated=True),
        }),
        "duration": 6.0,
    })


def moving_circles_saturated() -> Scenario:
    base = moving_circles()
    return base.model_copy(update={
        "name": "moving_circles_saturated",
        "description": "Plain barrier unaware of a ±1 m/s, 0.1 s lag actuator; leaves the safe set near t = 2.5 s",
        "robot": base.robot.model_copy(update={"velocity_limit": 1.0, "actuator_time_constant": 0.1}),
        "duration": 6.0,
    })


def _rectangle_controller(kind: str) -> ControllerSpec:
    obstacle_radius = Polytope.box(RECTANGLE_SIZE).bounding_radius()
    return ControllerSpec(
        kind=kind,
        box=ControlBox.symmetric(1.0, 2),
        reference=ReferenceSpec(kind="proportional", kp=2.0),
        cbf=CbfConfig(gamma=1.0, beta=1.03, b=1e-3, actuation_inflated=True),
        mpc=MpcConfig(
            horizon=1.5, sample_time=0.05, d_risk=1.5, d_obs=1.5,
            w_target=0.1, w_effort=0.1, w_avoid=10.0,
            robot_radius=ROBOT_RADIUS, obstacle_radius=obstacle_radius,
        ),
    )


def moving_rectangle() -> Scenario:
    return Scenario(
        name="moving_rectangle",
        description="Sphere robot driving to (20, -0.5) past a 3 x 0.4 x 2 m box moving at -4 m/s (TVCBFQP)",
        robot=_circle_robot(),
        obstacles=[ObstacleScript(
            name="rectangle",
            primitive=Polytope.box(RECTANGLE_SIZE),
            initial_pose=Pose(position=(5.0, 0.0, 0.0)),
            profile=[VelocitySegment(velocity=(-4.0, 0.0, 0.0))],
        )],
        controller=_rectangle_controller("tvcbfqp"),
        target=(20.0, -0.5, 0.0),
        duration=40.0,
    )


def moving_rectangle_mpc() -> Scenario:
    return moving_rectangle().model_copy(update={
        "name": "moving_rectangle_mpc",
        "description": "Moving rectangle under the half-space MPC baseline",
        "controller": _rectangle_controller("mpc"),
    })


def _arm_robot() -> RobotSpec:
    return RobotSpec(
        kind="planar_arm",
        primitives=[Capsule(length=length, radius=ARM_LINK_RADIUS) for length in ARM_LINKS],
        link_lengths=ARM_LINKS,
        initial_state=ARM_HOME,
    )


def _arm_controller() -> ControllerSpec:
    return ControllerSpec(
        box=ControlBox.symmetric(2.0, len(ARM_LINKS)),
        reference=ReferenceSpec(kind="pd", kp=2.0, kd=0.1, nominal=ARM_HOME),
        cbf=CbfConfig(gamma=1.0, beta=1.03),
    )


def _descending_box(name: str, start, velocity, stop_time: float) -> ObstacleScript:
    return ObstacleScript(
        name=name,
        primitive=Polytope.box((0.3, 0.3, 0.3)),
        initial_pose=Pose(position=tuple(start)),
        profile=[
            VelocitySegment(velocity=tuple(velocity)),
            VelocitySegment(start_time=stop_time),
        ],
    )


def planar_arm_box() -> Scenario:
    return Scenario(
        name="planar_arm_box",
        description="3-link planar arm holding its home posture while a box descends onto the last link",
        robot=_arm_robot(),
        obstacles=[_descending_box("box", (1.0, 1.0, 0.0), (0.0, -0.25, 0.0), 2.4)],
        controller=_arm_controller(),
        duration=4.0,
    )


def planar_arm_two_boxes() -> Scenario:
    return Scenario(
        name="planar_arm_two_boxes",
        description="3-link planar arm with one box descending from above and one rotating box rising from below",
        robot=_arm_robot(),
        obstacles=[
            _descending_box("box_above", (1.0, 1.0, 0.0), (0.0, -0.25, 0.0), 2.4),
            ObstacleScript(
                name="box_below",
                primitive=Polytope.box((0.3, 0.3, 0.3)),
                initial_pose=Pose(position=(0.6, -0.8, 0.0)),
                profile=[
                    VelocitySegment(velocity=(0.0, 0.2, 0.0), angular_velocity=(0.0, 0.0, 0.5)),
                    VelocitySegment(start_time=2.0),
                ],
            ),
        ],
        controller=_arm_controller(),
        duration=4.0,
    )


_REGISTRY: Dict[str, Callable[[], Scenario]] = {
    "moving_circles": moving_circles,
    "moving_circles_noisy": moving_circles_noisy,
    "moving_circles_actuation": moving_circles_actuation,
    "moving_circles_saturated": moving_circles_saturated,
    "moving_rectangle": moving_rectangle,
    "moving_rectangle_mpc": moving_rectangle_mpc,
    "planar_arm_box": planar_arm_box,
    "planar_arm_two_boxes": planar_arm_two_boxes,
}


def builtin_scenarios() -> Dict[str, Scenario]:
    return {name: build() for name, build in _REGISTRY.items()}


def get_scenario(name: str) -> Scenario:
    if name not in _REGISTRY:
        raise ScenarioError(f"Unknown scenario '{name}'. Available: {', '.join(sorted(_REGISTRY))}")
    return _REGISTRY[name]()
