from typing import Dict, Literal

from pydantic import BaseModel, Field


class LossRecord(BaseModel):
    """One line of the fit loss log."""

    record: Literal["iteration"] = "iteration"
    iteration: int = Field(..., ge=0)
    loss: float
    terms: Dict[str, float]
    step_sizes: Dict[str, float]
    accepted: bool = True

    model_config = {
        "json_schema_extra": {
            "example": {
                "record": "iteration",
                "iteration": 1,
                "loss": 0.0123,
                "terms": {"photometric": 0.0123, "depth": 0.0},
                "step_sizes": {"color": 0.5},
                "accepted": True,
            }
        }
    }


class FitSummaryRecord(BaseModel):
    """Last line of the fit loss log."""

    record: Literal["summary"] = "summary"
    iterations: int = Field(..., ge=0)
    accepted_steps: int = Field(..., ge=0)
    initial_loss: float
    final_loss: float
    initial_photometric: float
    final_photometric: float
    photometric_ratio: float = Field(..., description="final / initial photometric term, 0 when the start is exact")
