from typing import List

from pydantic import BaseModel, Field


class FaceDiagnostics(BaseModel):
    face: int = Field(..., ge=0)
    det_jacobian: float = Field(..., description="det(J) of the unblended Jacobian")
    det_blended: float = Field(..., description="det(U_b P_b) after blending")
    condition_number: float
    stretch_psd: bool = Field(..., description="Blended stretch P_b is symmetric PSD")
    rotation_residual: float = Field(..., description="max |U_bᵀU_b − I|")


class DeformDiagnostics(BaseModel):
    """Summary written next to the deformed surfel set."""

    n_faces: int
    n_surfels: int
    adjacency: str
    min_det: float
    max_det: float
    max_condition_number: float
    all_psd: bool
    faces: List[FaceDiagnostics] = Field(default_factory=list)

    model_config = {
        "json_schema_extra": {
            "example": {
                "n_faces": 2,
                "n_surfels": 8,
                "adjacency": "edge",
                "min_det": 1.0,
                "max_det": 1.0,
                "max_condition_number": 1.0,
                "all_psd": True,
                "faces": [],
            }
        }
    }
