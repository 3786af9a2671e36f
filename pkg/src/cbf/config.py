from typing import Any, Dict, Literal

from pydantic import BaseModel, Field, NonNegativeFloat, PositiveFloat


class CbfConfig(BaseModel):
    """Barrier parameters shared by every body pair of one controller."""

    gamma: PositiveFloat = 1.0
    beta: float = Field(default=1.03, ge=1.0)
    dt: PositiveFloat = 0.01
    k: NonNegativeFloat = 0.0
    b: NonNegativeFloat = 0.0
    time_varying: bool = True
    noise_robust: bool = False
    actuation_inflated: bool = False
    rhs_only: bool = False
    inflate_when_receding: bool = False
    differentiate_projection: bool = False
    worst_case_direction: Literal["descent", "ascent"] = "descent"
    worst_case_weighting: Literal["covariance", "gradient"] = "covariance"
    gradient_method: Literal["analytic", "finite_difference"] = "analytic"
    retain_plain_row: bool = True
    prune_threshold: PositiveFloat = 50.0

    def with_overrides(self, **overrides: Any) -> "CbfConfig":
        """Validated copy; ``None`` values leave the field unchanged."""
        updates: Dict[str, Any] = {k: v for k, v in overrides.items() if v is not None}
        return CbfConfig.model_validate({**self.model_dump(), **updates})
