from typing import Literal, Optional

from pydantic import BaseModel, model_validator

from cbf.config import CbfConfig
from utils.errors import ParameterError
from .controllers.base import Controller
from .controllers.mpc_controller import MpcController
from .controllers.tvcbf_controller import TvcbfController
from .mpc import MpcConfig
from .qp import ControlBox
from .reference import ReferenceSpec


class ControllerSpec(BaseModel):
    kind: Literal["tvcbfqp", "mpc"] = "tvcbfqp"
    box: ControlBox
    reference: ReferenceSpec
    cbf: CbfConfig = CbfConfig()
    mpc: Optional[MpcConfig] = None

    @model_validator(mode="after")
    def _mpc_configured(self) -> "ControllerSpec":
        if self.kind == "mpc" and self.mpc is None:
            raise ParameterError("Controller kind 'mpc' needs an mpc configuration")
        return self


class ControllerFactory:
    @staticmethod
    def create_controller(spec: ControllerSpec) -> Controller:
        if spec.kind == "tvcbfqp":
            return TvcbfController(spec.cbf, spec.box)
        elif spec.kind == "mpc":
            return MpcController(spec.mpc, spec.box)
        else:
            raise ParameterError(f"Unknown controller kind: {spec.kind}")
