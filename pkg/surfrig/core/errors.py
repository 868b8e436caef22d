"""
Exception hierarchy for surfrig.

Every error carries a human-readable ``detail`` plus an optional ``context``
mapping, and a class-level ``exit_code`` used by the CLI.
"""

from typing import Any, Dict, Optional


class SurfrigError(Exception):
    """Base class for all surfrig errors."""

    exit_code: int = 2

    def __init__(self, detail: str, context: Optional[Dict[str, Any]] = None):
        super().__init__(detail)
        self.detail = detail
        self.context: Dict[str, Any] = dict(context or {})

    @property
    def kind(self) -> str:
        return type(self).__name__


# Input errors (exit code 2)
class InputError(SurfrigError):
    exit_code = 2


class ParseError(InputError):
    def __init__(self, detail: str, line: int, path: Optional[str] = None):
        super().__init__(f"line {line}: {detail}", {"line": line, "path": path})
        self.line = line


class NonTriangleFace(InputError):
    def __init__(self, line: int, vertex_count: int):
        super().__init__(
            f"line {line}: face has {vertex_count} vertices, only triangles are supported",
            {"line": line, "vertex_count": vertex_count},
        )
        self.line = line


class TopologyMismatch(InputError):
    pass


class InvalidCamera(InputError):
    pass


class DimensionMismatch(InputError):
    pass


class SurfelSetError(InputError):
    pass


class ConfigError(InputError):
    pass


class IoError(InputError):
    pass


# Geometry / numerical errors on inputs (exit code 2)
class GeometryError(SurfrigError):
    exit_code = 2


class DegenerateTriangle(GeometryError):
    def __init__(self, detail: str, face: Optional[int] = None):
        super().__init__(detail, {"face": face})
        self.face = face


class InvertedTriangle(GeometryError):
    def __init__(self, face: int, det: float):
        super().__init__(
            f"face {face} is inverted by the deformation (det={det:.3e})",
            {"face": face, "det": det},
        )
        self.face = face


class SingularMatrix(GeometryError):
    pass


class SingularOrInverted(GeometryError):
    def __init__(self, detail: str, neighbor: Optional[int] = None):
        super().__init__(detail, {"neighbor": neighbor})
        self.neighbor = neighbor


class NearPiRotation(GeometryError):
    def __init__(self, detail: str, neighbor: Optional[int] = None):
        super().__init__(detail, {"neighbor": neighbor})
        self.neighbor = neighbor


# Optimization errors (exit code 3)
class DivergedLoss(SurfrigError):
    exit_code = 3

    def __init__(self, iteration: int, terms: Dict[str, float]):
        bad = sorted(name for name, value in terms.items() if value != value or abs(value) == float("inf"))
        super().__init__(
            f"loss diverged at iteration {iteration} (non-finite terms: {', '.join(bad) or 'total'})",
            {"iteration": iteration, "terms": terms},
        )
        self.iteration = iteration
