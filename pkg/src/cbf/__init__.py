from .barrier import (
    ConstraintRow,
    assemble_rows,
    cbf_time_partial,
    cbf_value,
    constraint_row,
    inflated_cbf_value,
    pair_rows,
    scaling_lower_bound,
    scaling_rate_bound,
)
from .config import CbfConfig
from .pair import BodyPairState, planar_position_jacobian
from .robust import WorstCase, brute_force_worst_config, robust_obstacle_pose, worst_case_position

__all__ = [
    "BodyPairState",
    "CbfConfig",
    "ConstraintRow",
    "WorstCase",
    "assemble_rows",
    "brute_force_worst_config",
    "cbf_time_partial",
    "cbf_value",
    "constraint_row",
    "inflated_cbf_value",
    "pair_rows",
    "planar_position_jacobian",
    "robust_obstacle_pose",
    "scaling_lower_bound",
    "scaling_rate_bound",
    "worst_case_position",
]
