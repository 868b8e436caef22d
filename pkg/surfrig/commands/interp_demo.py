"""
interp-demo: element-wise interpolation against JBS on a rotation sweep, and
GA-baseline against Jacobian deformation on an anisotropically stretched,
folded two-triangle hinge.
"""

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Sequence

import numpy as np

from surfrig.commands.common import CommandContext, emit
from surfrig.core.logging import get_logger
from surfrig.core.tracing import trace_function
from surfrig.geometry.mat3 import condition_number, rotation_exp, rotation_z
from surfrig.io.images import save_color
from surfrig.models.mesh import TriMesh
from surfrig.models.render import Camera
from surfrig.render.camera import ray_directions
from surfrig.render.rasterizer import render
from surfrig.rig.baseline import ga_deform_all
from surfrig.rig.binding import bind_lattice_surfels
from surfrig.rig.skinning import PoseRig, jbs, lerp_blend
from surfrig.schemas.run_config import RunConfig

logger = get_logger(__name__)

NAME = "interp-demo"
HELP = "compare element-wise blending with JBS and GA rigging with Jacobian rigging"

SWEEP_TS = tuple(round(0.1 * k, 1) for k in range(11))
SWEEP_ANGLE = math.pi - 0.01
HINGE_STRETCH = 4.0
HINGE_BEND_DEGREES = 30.0
HINGE_DIVISIONS = 8
COVERAGE_THRESHOLD = 0.5


@dataclass(frozen=True)
class SweepRow:
    t: float
    det_lerp: float
    det_jbs: float
    cond_lerp: float
    cond_jbs: float


def blend_sweep(A, B, ts: Sequence[float] = SWEEP_TS) -> List[SweepRow]:
    """det and condition number of lerp_blend and jbs for weights (1 − t, t)."""
    rows = []
    for t in ts:
        weights = np.array([1.0 - t, t])
        lerp = lerp_blend([A, B], weights)
        blended = jbs([A, B], weights)
        rows.append(SweepRow(
            t=float(t),
            det_lerp=float(np.linalg.det(lerp)),
            det_jbs=float(np.linalg.det(blended)),
            cond_lerp=condition_number(lerp),
            cond_jbs=condition_number(blended),
        ))
    return rows


def hinge_meshes(stretch: float = HINGE_STRETCH, bend_degrees: float = HINGE_BEND_DEGREES):
    """
    Unit square of two triangles in the z = 0 plane, and its deformed copy:
    stretched ``stretch`` times along x, then the second face folded about
    the shared diagonal by ``bend_degrees``.
    """
    canonical = TriMesh(
        vertices=[[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [1.0, 1.0, 0.0], [0.0, 1.0, 0.0]],
        faces=[[0, 1, 2], [0, 2, 3]],
    )
    vertices = canonical.vertices @ np.diag([stretch, 1.0, 1.0]).T
    axis = vertices[2] - vertices[0]
    fold = rotation_exp(math.radians(bend_degrees) * axis / np.linalg.norm(axis))
    vertices[3] = vertices[0] + fold @ (vertices[3] - vertices[0])
    return canonical, TriMesh(vertices, canonical.faces.copy())


def strip_camera(deformed: TriMesh, size: int = 64, fov_y: float = 45.0) -> Camera:
    """Top-down camera framing the whole deformed strip."""
    lo = deformed.vertices.min(axis=0)
    hi = deformed.vertices.max(axis=0)
    center = 0.5 * (lo + hi)
    half_extent = 0.575 * float(max(hi[0] - lo[0], hi[1] - lo[1]))
    distance = half_extent / math.tan(math.radians(fov_y) / 2.0)
    return Camera(
        position=center + np.array([0.0, 0.0, distance]),
        look_at=center,
        up=[0.0, 1.0, 0.0],
        fov_y=fov_y,
        width=size,
        height=size,
    )


def silhouette(mesh: TriMesh, camera: Camera) -> np.ndarray:
    """Pixels whose center ray hits any triangle of ``mesh``."""
    dirs = ray_directions(camera)
    mask = np.zeros(dirs.shape[:2], dtype=bool)
    origin = camera.position
    for f in range(mesh.n_faces):
        v0, v1, v2 = mesh.triangle(f)
        e1, e2 = v1 - v0, v2 - v0
        p = np.cross(dirs, e2)
        det = p @ e1
        with np.errstate(divide="ignore", invalid="ignore"):
            inv = 1.0 / det
            s = origin - v0
            u = (p @ s) * inv
            q = np.cross(s, e1)
            v = (dirs @ q) * inv
            t = (q @ e2) * inv
            hit = (np.abs(det) > 1e-12) & (u >= 0.0) & (v >= 0.0) & (u + v <= 1.0) & (t > 0.0)
        mask |= hit
    return mask


def coverage_gap(target: np.ndarray, transmittance: np.ndarray, threshold: float = COVERAGE_THRESHOLD) -> int:
    """Pixels inside the target silhouette whose rendered opacity stays below ``threshold``."""
    return int(np.count_nonzero(target & ((1.0 - transmittance) < threshold)))


def strip_comparison(size: int = 64, threads: int = 1, divisions: int = HINGE_DIVISIONS) -> Dict[str, object]:
    """
    Render the folded, stretched hinge with Jacobian and GA rigging and count
    silhouette pixels each leaves uncovered.

    Surfels sit on a per-face lattice with half-step scales, dense enough that
    every canonical point stays above the coverage threshold.
    """
    canonical, deformed = hinge_meshes()
    surfels = bind_lattice_surfels(canonical, divisions, scale_ratio=0.5, sh_degree=0, base_color=0.9)
    camera = strip_camera(deformed, size)
    target = silhouette(deformed, camera)

    jacobian_surfels = PoseRig(canonical, deformed).deform(surfels)
    ga_surfels = ga_deform_all(surfels, canonical, deformed)
    jacobian_render = render(jacobian_surfels, camera, threads=threads)
    ga_render = render(ga_surfels, camera, threads=threads)
    return {
        "target": target,
        "jacobian": jacobian_render,
        "ga": ga_render,
        "target_pixels": int(np.count_nonzero(target)),
        "gap_jacobian": coverage_gap(target, jacobian_render.transmittance),
        "gap_ga": coverage_gap(target, ga_render.transmittance),
    }


def _write_sweep(rows: List[SweepRow], path: Path) -> Path:
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["t", "det_lerp", "det_jbs", "cond_lerp", "cond_jbs"])
        for row in rows:
            writer.writerow([f"{row.t:.1f}", repr(row.det_lerp), repr(row.det_jbs), repr(row.cond_lerp), repr(row.cond_jbs)])
    return path


def _write_coverage(result: Dict[str, object], path: Path) -> Path:
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["method", "target_pixels", "gap_pixels"])
        writer.writerow(["jacobian", result["target_pixels"], result["gap_jacobian"]])
        writer.writerow(["ga", result["target_pixels"], result["gap_ga"]])
    return path


@trace_function("surfrig.command.interp_demo")
def run(config: RunConfig, ctx: CommandContext) -> int:
    out = ctx.out_dir
    out.mkdir(parents=True, exist_ok=True)

    rows = blend_sweep(np.eye(3), rotation_z(SWEEP_ANGLE))
    _write_sweep(rows, out / "interp_sweep.csv")

    result = strip_comparison(threads=ctx.threads)
    _write_coverage(result, out / "coverage.csv")
    save_color(np.repeat(result["target"][..., None].astype(np.float64), 3, axis=-1), out / "strip_target.png")
    save_color(result["jacobian"].color, out / "strip_jacobian.png")
    save_color(result["ga"].color, out / "strip_ga.png")

    midpoint = rows[len(rows) // 2]
    logger.info(
        f"coverage gap: jacobian={result['gap_jacobian']} ga={result['gap_ga']}",
        extra={"command": NAME},
    )
    emit(ctx, {
        "command": NAME,
        "midpoint_det_lerp": midpoint.det_lerp,
        "midpoint_det_jbs": midpoint.det_jbs,
        "target_pixels": result["target_pixels"],
        "gap_jacobian": result["gap_jacobian"],
        "gap_ga": result["gap_ga"],
    })
    return 0
