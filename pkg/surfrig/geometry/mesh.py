"""
Per-triangle geometry descriptors and triangle adjacency.
"""

import math
from collections import defaultdict
from typing import List, Sequence

import numpy as np

from surfrig.core.errors import DegenerateTriangle, InvertedTriangle, TopologyMismatch
from surfrig.core.logging import DiagnosticsLogger, get_logger
from surfrig.geometry.mat3 import Mat3, Vec3
from surfrig.models.mesh import Adjacency, TriangleFrame, TriMesh

logger = get_logger(__name__)
diagnostics = DiagnosticsLogger(logger)

AREA_EPS = 1e-12
ADJACENCY_MODES = ("edge", "vertex")


def _as_point(p) -> Vec3:
    return np.asarray(p, dtype=np.float64).reshape(3)


def triangle_area(v0, v1, v2) -> float:
    v0, v1, v2 = _as_point(v0), _as_point(v1), _as_point(v2)
    return 0.5 * float(np.linalg.norm(np.cross(v1 - v0, v2 - v0)))


def mean_edge_length(v0, v1, v2) -> float:
    v0, v1, v2 = _as_point(v0), _as_point(v1), _as_point(v2)
    return float(np.linalg.norm(v1 - v0) + np.linalg.norm(v2 - v1) + np.linalg.norm(v0 - v2)) / 3.0


def _check_area(v0, v1, v2, face=None) -> None:
    area = triangle_area(v0, v1, v2)
    if not area >= AREA_EPS:
        raise DegenerateTriangle(f"triangle area {area:.3e} is below {AREA_EPS:g}", face=face)


def build_edge_matrix(v0, v1, v2, face=None) -> Mat3:
    """
    Columns v1−v0, v2−v0 and v3−v0 where v3 = v0 + cross/√‖cross‖.

    The third column points along the unit normal with length √‖cross‖, so
    E scales linearly with the triangle.
    """
    v0, v1, v2 = _as_point(v0), _as_point(v1), _as_point(v2)
    _check_area(v0, v1, v2, face)
    e1 = v1 - v0
    e2 = v2 - v0
    cross = np.cross(e1, e2)
    e3 = cross / math.sqrt(float(np.linalg.norm(cross)))
    return np.column_stack([e1, e2, e3])


def build_ga_frame(v0, v1, v2, face=None) -> TriangleFrame:
    v0, v1, v2 = _as_point(v0), _as_point(v1), _as_point(v2)
    E = build_edge_matrix(v0, v1, v2, face)
    base = v1 - v0
    base_len = float(np.linalg.norm(base))
    r1 = base / base_len
    normal = np.cross(base, v2 - v0)
    normal = normal / np.linalg.norm(normal)
    r2 = np.cross(normal, r1)
    height = float(abs((v2 - v0) @ r2))
    return TriangleFrame(
        E=E,
        T_p=(v0 + v1 + v2) / 3.0,
        R_p=np.column_stack([r1, r2, normal]),
        s_p=0.5 * (base_len + height),
    )


def build_frames(mesh: TriMesh) -> List[TriangleFrame]:
    return [build_ga_frame(*mesh.triangle(f), face=f) for f in range(mesh.n_faces)]


def build_adjacency(mesh: TriMesh, mode: str = "edge") -> Adjacency:
    """
    Edge mode links triangles sharing an edge; vertex mode links triangles
    sharing at least one vertex. Each list is [self, ascending neighbors].
    """
    if mode not in ADJACENCY_MODES:
        raise ValueError(f"unknown adjacency mode {mode!r}")

    buckets = defaultdict(set)
    for f, (i, j, k) in enumerate(mesh.faces.tolist()):
        if mode == "edge":
            keys: Sequence = (frozenset((i, j)), frozenset((j, k)), frozenset((k, i)))
        else:
            keys = (i, j, k)
        for key in keys:
            buckets[key].add(f)

    linked = [set() for _ in range(mesh.n_faces)]
    for faces in buckets.values():
        for f in faces:
            linked[f].update(faces)

    neighbors = [[f] + sorted(linked[f] - {f}) for f in range(mesh.n_faces)]
    return Adjacency(neighbors=neighbors, mode=mode)


def validate_mesh(mesh: TriMesh, label: str = "mesh") -> None:
    faces = mesh.faces
    if faces.size and (faces.min() < 0 or faces.max() >= mesh.n_vertices):
        raise TopologyMismatch(f"{label}: face index out of range")
    for f, (i, j, k) in enumerate(faces.tolist()):
        if len({i, j, k}) != 3:
            raise DegenerateTriangle(f"{label}: face {f} repeats a vertex index", face=f)
        try:
            _check_area(*mesh.triangle(f), face=f)
        except DegenerateTriangle:
            diagnostics.log_rejected_face(f, f"{label} area below {AREA_EPS:g}")
            raise


def validate_pair(canonical: TriMesh, deformed: TriMesh) -> None:
    """
    Raises:
        TopologyMismatch: vertex counts, face counts or face lists differ.
        DegenerateTriangle: a triangle of either mesh has (near) zero area.
        InvertedTriangle: det(Ẽ E⁻¹) <= 0 for some face.
    """
    if canonical.n_vertices != deformed.n_vertices:
        raise TopologyMismatch(
            f"vertex counts differ: {canonical.n_vertices} vs {deformed.n_vertices}"
        )
    if canonical.n_faces != deformed.n_faces:
        raise TopologyMismatch(f"face counts differ: {canonical.n_faces} vs {deformed.n_faces}")
    if not np.array_equal(canonical.faces, deformed.faces):
        face = int(np.argmax(np.any(canonical.faces != deformed.faces, axis=1)))
        raise TopologyMismatch(f"face {face} has different vertex indices", {"face": face})

    validate_mesh(canonical, "canonical")
    validate_mesh(deformed, "deformed")

    for f in range(canonical.n_faces):
        det = orientation_det(canonical.triangle(f), deformed.triangle(f))
        if not det > 0.0:
            diagnostics.log_rejected_face(f, "inverted by deformation")
            raise InvertedTriangle(f, det)


def orientation_det(canonical_tri, deformed_tri) -> float:
    """
    det(Ẽ E⁻¹) with the canonical unit normal standing in for the fourth
    vertex column of both matrices.

    Negative means the deformed triangle faces away from its canonical side.
    """
    v0, v1, v2 = (_as_point(p) for p in canonical_tri)
    w0, w1, w2 = (_as_point(p) for p in deformed_tri)
    cross = np.cross(v1 - v0, v2 - v0)
    n = cross / np.linalg.norm(cross)
    return float(np.cross(w1 - w0, w2 - w0) @ n) / float(np.linalg.norm(cross))
