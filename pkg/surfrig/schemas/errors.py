from typing import Any, Dict, List

from pydantic import BaseModel, Field


class ErrorReport(BaseModel):
    """Error document printed to stderr when a command fails"""
    error: str = Field(..., description="Error kind, e.g. TopologyMismatch")
    detail: str
    exit_code: int
    context: Dict[str, Any] = Field(default_factory=dict)

    model_config = {
        "json_schema_extra": {
            "example": {
                "error": "TopologyMismatch",
                "detail": "face counts differ: 2 vs 3",
                "exit_code": 2,
                "context": {},
            }
        }
    }


class SuiteResult(BaseModel):
    name: str
    passed: int
    failed: int
    failures: List[str] = Field(default_factory=list)


class SelftestReport(BaseModel):
    suites: List[SuiteResult]
    passed: bool


# Exit codes of every command
EXIT_CODES = {
    0: "Success",
    1: "Self-test failure",
    2: "Input error",
    3: "Numerical divergence",
    4: "Internal error",
}
