from .base import ControlContext, ControlOutput, Controller, ObstacleEstimate, RobotSegment
from .mpc_controller import MpcController
from .tvcbf_controller import TvcbfController

__all__ = [
    "ControlContext",
    "ControlOutput",
    "Controller",
    "MpcController",
    "ObstacleEstimate",
    "RobotSegment",
    "TvcbfController",
]
