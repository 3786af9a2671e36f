from .batch import run_batch, seed_sweep
from .engine import Simulation, TickRecord, Trace, run
from .metrics import RunSummary, metrics
from .scenario import NoiseSpec, ObstacleScript, RobotSpec, Scenario, VelocitySegment
from .scenarios import builtin_scenarios, get_scenario

__all__ = [
    "NoiseSpec",
    "ObstacleScript",
    "RobotSpec",
    "RunSummary",
    "Scenario",
    "Simulation",
    "TickRecord",
    "Trace",
    "VelocitySegment",
    "builtin_scenarios",
    "get_scenario",
    "metrics",
    "run",
    "run_batch",
    "seed_sweep",
]
