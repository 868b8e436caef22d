"""
Training energies: photometric, depth distortion, normal consistency,
eye opacity and the two binding regularizers.
"""

from dataclasses import dataclass
from typing import Dict, Optional, Sequence

import numpy as np

from surfrig.fit.ssim import photometric_loss
from surfrig.geometry.mesh import mean_edge_length
from surfrig.models.mesh import TriMesh
from surfrig.models.render import Camera, RenderBuffers
from surfrig.models.surfel import Surfel
from surfrig.render.camera import backproject, ray_directions
from surfrig.schemas.run_config import EnergyConfig

TERM_NAMES = ("photometric", "depth", "normal", "eye", "position", "scaling")


@dataclass(frozen=True)
class EnergyBreakdown:
    raw: Dict[str, float]
    weighted: Dict[str, float]
    total: float

    def is_finite(self) -> bool:
        return bool(np.isfinite(self.total)) and all(np.isfinite(v) for v in self.raw.values())


def depth_distortion(hit_weights, hit_depths) -> float:
    """Mean over pixels of Σ_{i≠j} ωᵢωⱼ|tᵢ − tⱼ| (ordered pairs)."""
    w = np.asarray(hit_weights, dtype=np.float64)
    t = np.asarray(hit_depths, dtype=np.float64)
    if w.shape[0] < 2:
        return 0.0
    per_pixel = np.zeros(w.shape[1:])
    for i in range(w.shape[0]):
        per_pixel += w[i] * np.sum(w * np.abs(t[i] - t), axis=0)
    return float(per_pixel.mean())


def depth_normals(depth: np.ndarray, camera: Camera) -> np.ndarray:
    """
    Unit normals of the backprojected depth map from central differences,
    facing the camera. Border pixels and flat-zero crosses get a zero normal.
    """
    points = backproject(camera, depth)
    out = np.zeros_like(points)
    if depth.shape[0] < 3 or depth.shape[1] < 3:
        return out
    left_to_right = points[1:-1, 2:] - points[1:-1, :-2]
    bottom_to_top = points[:-2, 1:-1] - points[2:, 1:-1]
    n = np.cross(left_to_right, bottom_to_top)
    norm = np.linalg.norm(n, axis=-1, keepdims=True)
    n = np.divide(n, norm, out=np.zeros_like(n), where=norm > 0.0)
    dirs = ray_directions(camera)[1:-1, 1:-1]
    facing = np.sum(n * dirs, axis=-1, keepdims=True)
    out[1:-1, 1:-1] = np.where(facing > 0.0, -n, n)
    return out


def _interior_mask(covered: np.ndarray) -> np.ndarray:
    mask = np.zeros_like(covered)
    if covered.shape[0] < 3 or covered.shape[1] < 3:
        return mask
    mask[1:-1, 1:-1] = (
        covered[1:-1, 1:-1]
        & covered[:-2, 1:-1]
        & covered[2:, 1:-1]
        & covered[1:-1, :-2]
        & covered[1:-1, 2:]
    )
    return mask


def normal_consistency(buffers: RenderBuffers, camera: Camera) -> float:
    """
    Mean over covered pixels (with covered 4-neighbors) of Σᵢ ωᵢ(1 − nᵢ·N),
    N being the depth-derived normal.
    """
    mask = _interior_mask(buffers.covered)
    if not mask.any():
        return 0.0
    N = depth_normals(buffers.depth, camera)
    cos = np.sum(buffers.hit_normals * N[None], axis=-1)           # (K, H, W)
    per_pixel = np.sum(buffers.hit_weights * (1.0 - cos), axis=0)
    return float(per_pixel[mask].mean())


def eye_opacity_loss(surfels: Sequence[Surfel]) -> float:
    """Σ over eye surfels of (1 − α)²."""
    return float(sum((1.0 - s.alpha) ** 2 for s in surfels if s.eye_flag))


def parent_edge_lengths(mesh: TriMesh) -> np.ndarray:
    return np.array([mean_edge_length(*mesh.triangle(f)) for f in range(mesh.n_faces)])


def binding_regularizers(
    surfels: Sequence[Surfel],
    eps_pos: float = 1.0,
    eps_scale: float = 0.6,
    edge_lengths: Optional[Sequence[float]] = None,
):
    """
    (L_position, L_scaling): mean squared hinge excess of |μ_c| over ε_pos and
    of the tangent scales over ε_scale, both in parent edge-length units.
    """
    if not surfels:
        return 0.0, 0.0
    position = 0.0
    scaling = 0.0
    for s in surfels:
        ell = float(edge_lengths[s.parent]) if edge_lengths is not None else 1.0
        excess_pos = np.maximum(np.abs(s.mu_c) / ell - eps_pos, 0.0)
        excess_scale = np.maximum(np.asarray(s.scales) / ell - eps_scale, 0.0)
        position += float(excess_pos @ excess_pos)
        scaling += float(excess_scale @ excess_scale)
    return position / len(surfels), scaling / len(surfels)


def combine_terms(raw: Dict[str, float], cfg: EnergyConfig) -> EnergyBreakdown:
    weights = {
        "photometric": 1.0,
        "depth": cfg.lambda_depth,
        "normal": cfg.lambda_normal,
        "eye": cfg.lambda_eye,
        "position": cfg.weight_position,
        "scaling": cfg.weight_scaling,
    }
    weighted = {name: weights[name] * raw.get(name, 0.0) for name in TERM_NAMES}
    total = 0.0
    for name in TERM_NAMES:
        total += weighted[name]
    return EnergyBreakdown(raw={name: raw.get(name, 0.0) for name in TERM_NAMES}, weighted=weighted, total=total)


def total_energy(
    buffers: RenderBuffers,
    target,
    surfels: Sequence[Surfel],
    cfg: EnergyConfig,
    camera: Camera,
    edge_lengths: Optional[Sequence[float]] = None,
) -> EnergyBreakdown:
    """L_photo + λ_depth·L_depth + λ_normal·L_normal + λ_eye·L_eye plus the binding regularizers."""
    raw = {"photometric": photometric_loss(buffers.color, target, cfg.beta)}
    raw["depth"] = depth_distortion(buffers.hit_weights, buffers.hit_depths) if cfg.lambda_depth > 0.0 else 0.0
    raw["normal"] = normal_consistency(buffers, camera) if cfg.lambda_normal > 0.0 else 0.0
    raw["eye"] = eye_opacity_loss(surfels)
    raw["position"], raw["scaling"] = binding_regularizers(surfels, cfg.eps_pos, cfg.eps_scale, edge_lengths)
    return combine_terms(raw, cfg)
