from dataclasses import dataclass, field
from typing import List, Tuple

import numpy as np
from numpy.typing import NDArray


@dataclass(frozen=True)
class TriMesh:
    """Triangle mesh: (V, 3) float64 vertices and (F, 3) int64 faces."""

    vertices: NDArray[np.float64]
    faces: NDArray[np.int64]

    def __post_init__(self):
        object.__setattr__(self, "vertices", np.asarray(self.vertices, dtype=np.float64).reshape(-1, 3))
        object.__setattr__(self, "faces", np.asarray(self.faces, dtype=np.int64).reshape(-1, 3))

    @property
    def n_vertices(self) -> int:
        return int(self.vertices.shape[0])

    @property
    def n_faces(self) -> int:
        return int(self.faces.shape[0])

    def triangle(self, face: int) -> Tuple[NDArray[np.float64], NDArray[np.float64], NDArray[np.float64]]:
        i, j, k = self.faces[face]
        return self.vertices[i], self.vertices[j], self.vertices[k]

    def transformed(self, matrix, offset=(0.0, 0.0, 0.0)) -> "TriMesh":
        """Copy with every vertex mapped to matrix @ v + offset."""
        M = np.asarray(matrix, dtype=np.float64)
        return TriMesh(self.vertices @ M.T + np.asarray(offset, dtype=np.float64), self.faces.copy())


@dataclass(frozen=True)
class TriangleFrame:
    """
    Local geometry of one triangle.

    E: edge matrix [v1-v0, v2-v0, v3-v0]; T_p: barycenter;
    R_p: orthonormal frame [base, in-plane perpendicular, normal];
    s_p: mean of base length and height.
    """

    E: NDArray[np.float64]
    T_p: NDArray[np.float64]
    R_p: NDArray[np.float64]
    s_p: float


@dataclass(frozen=True)
class Adjacency:
    """Per-triangle neighbor lists, self first, then ascending indices."""

    neighbors: List[List[int]] = field(default_factory=list)
    mode: str = "edge"

    def __len__(self) -> int:
        return len(self.neighbors)

    def __getitem__(self, face: int) -> List[int]:
        return self.neighbors[face]
