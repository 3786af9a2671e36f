from .factory import ControllerFactory, ControllerSpec
from .mpc import MpcConfig, MpcResult, mpc_baseline
from .qp import ControlBox, QpResult, QpStatus, QpWorkspace, fallback_control, tvcbf_qp
from .reference import ReferenceSpec, pd_reference, proportional_reference

__all__ = [
    "ControlBox",
    "ControllerFactory",
    "ControllerSpec",
    "MpcConfig",
    "MpcResult",
    "QpResult",
    "QpStatus",
    "QpWorkspace",
    "ReferenceSpec",
    "fallback_control",
    "mpc_baseline",
    "pd_reference",
    "proportional_reference",
    "tvcbf_qp",
]
