import math
from typing import List, Literal, Optional, Tuple

from pydantic import BaseModel, Field, field_validator, model_validator

from surfrig.core.errors import SurfelSetError

SCHEMA_VERSION = 1
QUATERNION_TOL = 1e-6

Vector3 = Tuple[float, float, float]
Quaternion = Tuple[float, float, float, float]


class SurfelRecord(BaseModel):
    parent: int = Field(..., ge=0, description="Parent triangle index")
    mu_c: Vector3 = Field(..., description="Offset from the canonical parent barycenter")
    rotation: Quaternion = Field(..., description="R_c as a unit quaternion (w, x, y, z), w >= 0")
    scales: Tuple[float, float] = Field(..., description="Tangent scales s1, s2")
    alpha: float = Field(..., ge=0.0, le=1.0)
    sh: List[List[float]] = Field(..., description="Three rows of (L+1)^2 SH coefficients")
    eye_flag: bool = False

    @field_validator("rotation")
    @classmethod
    def check_unit(cls, value: Quaternion) -> Quaternion:
        norm = math.sqrt(sum(c * c for c in value))
        if abs(norm - 1.0) > QUATERNION_TOL:
            raise SurfelSetError(
                f"quaternion norm {norm:.9f} is not 1 within {QUATERNION_TOL:g}",
                {"norm": norm},
            )
        return value

    @field_validator("scales")
    @classmethod
    def check_scales(cls, value: Tuple[float, float]) -> Tuple[float, float]:
        if not (value[0] > 0.0 and value[1] > 0.0):
            raise ValueError("scales must be positive")
        return value

    @field_validator("sh")
    @classmethod
    def check_sh(cls, value: List[List[float]]) -> List[List[float]]:
        if len(value) != 3:
            raise ValueError("sh needs one row per color channel")
        width = len(value[0])
        if width not in (1, 4, 9, 16) or any(len(row) != width for row in value):
            raise ValueError("sh rows must hold 1, 4, 9 or 16 coefficients")
        return value


class LobeRecord(BaseModel):
    z: Vector3
    x: Vector3
    y: Vector3
    lam: float = Field(..., ge=0.0)
    mu: float = Field(..., ge=0.0)
    xi: float = Field(..., ge=0.0)


class SpecularHeadRecord(BaseModel):
    lobes: List[LobeRecord]
    pe_freqs: int = Field(..., ge=0)
    W1: List[List[float]]
    b1: List[float]
    W2: List[List[float]]
    b2: List[float]
    W3: List[List[float]]
    b3: List[float]


class SurfelSetFile(BaseModel):
    """Canonical surfels, blend logits and the optional specular head."""

    schema_version: int = SCHEMA_VERSION
    adjacency: Literal["edge", "vertex"] = "edge"
    surfels: List[SurfelRecord] = Field(default_factory=list)
    blend_logits: List[List[float]] = Field(default_factory=list)
    specular_head: Optional[SpecularHeadRecord] = None

    @field_validator("schema_version")
    @classmethod
    def check_version(cls, value: int) -> int:
        if value != SCHEMA_VERSION:
            raise SurfelSetError(
                f"unsupported surfel set schema version {value} (expected {SCHEMA_VERSION})",
                {"schema_version": value},
            )
        return value

    model_config = {
        "json_schema_extra": {
            "example": {
                "schema_version": 1,
                "adjacency": "edge",
                "surfels": [
                    {
                        "parent": 0,
                        "mu_c": [0.0, 0.0, 0.0],
                        "rotation": [1.0, 0.0, 0.0, 0.0],
                        "scales": [0.1, 0.1],
                        "alpha": 1.0,
                        "sh": [[1.77], [1.77], [1.77]],
                        "eye_flag": False,
                    }
                ],
                "blend_logits": [[0.0]],
            }
        }
    }


class DeformedSurfelRecord(BaseModel):
    mu: Vector3
    tangent_u: Vector3 = Field(..., description="First column of Σ^½")
    tangent_v: Vector3 = Field(..., description="Second column of Σ^½")
    normal: Vector3
    rotation: Quaternion = Field(..., description="Blended rotation U_b (w, x, y, z)")
    alpha: float
    sh: List[List[float]]
    eye_flag: bool = False


class DeformedSurfelSetFile(BaseModel):
    schema_version: int = SCHEMA_VERSION
    surfels: List[DeformedSurfelRecord] = Field(default_factory=list)

    @model_validator(mode="after")
    def check_version(self):
        if self.schema_version != SCHEMA_VERSION:
            raise SurfelSetError(f"unsupported deformed set schema version {self.schema_version}")
        return self
