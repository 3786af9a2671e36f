"""Nominal (safety-unaware) reference laws."""
from typing import Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, Field

from utils.errors import ParameterError


def _gain(k, n: int) -> np.ndarray:
    k = np.broadcast_to(np.asarray(k, dtype=float), (n,)).copy()
    if np.any(k < 0.0):
        raise ParameterError(f"Gains must be non-negative, got {k}")
    return k


def proportional_reference(position, target, kp) -> np.ndarray:
    """u = Kp·(target − p)."""
    p = np.asarray(position, dtype=float)
    return _gain(kp, p.size) * (np.asarray(target, dtype=float) - p)


def pd_reference(q, q_nominal, dq, kp, kd) -> np.ndarray:
    """u = Kp·(q̄ − q) − Kd·q̇."""
    q = np.asarray(q, dtype=float)
    n = q.size
    return _gain(kp, n) * (np.asarray(q_nominal, dtype=float) - q) - _gain(kd, n) * np.asarray(dq, dtype=float)


class ReferenceSpec(BaseModel):
    """Which nominal law produces u_ref, with its parameters."""

    kind: Literal["constant", "proportional", "pd"] = "constant"
    value: Tuple[float, ...] = ()
    kp: float = Field(default=1.0, ge=0.0)
    kd: float = Field(default=0.0, ge=0.0)
    nominal: Tuple[float, ...] = ()

    def evaluate(self, position: np.ndarray, target: Optional[np.ndarray], state: np.ndarray,
                 rate: np.ndarray) -> np.ndarray:
        if self.kind == "constant":
            return np.asarray(self.value, dtype=float)
        if self.kind == "proportional":
            if target is None:
                raise ParameterError("Proportional reference needs a target")
            return proportional_reference(position, np.asarray(target)[:position.size], self.kp)
        return pd_reference(state, self.nominal, rate, self.kp, self.kd)
