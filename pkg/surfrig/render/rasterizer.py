"""
Exact CPU rasterizer for deformed surfels.

Every pixel ray is intersected with every splat plane, hits are sorted by
ray depth (ties by surfel index) and composited front to back.
"""

import time
from concurrent.futures import ThreadPoolExecutor
from typing import Optional, Sequence

import numpy as np

from surfrig.appearance.color import total_color
from surfrig.core import metrics
from surfrig.core.logging import get_logger
from surfrig.core.tracing import trace_function
from surfrig.models.appearance import SpecularHead
from surfrig.models.render import Camera, PixelRecord, RenderBuffers, SplatHit
from surfrig.models.surfel import DeformedSurfel
from surfrig.render.camera import ray_directions, validate_camera

logger = get_logger(__name__)

CUTOFF = 3.0
T_NEAR = 1e-4
EPS_PARALLEL = 1e-9
MIN_TRANSMITTANCE = 1e-4


def ray_splat_intersect(
    origin, direction, ds: DeformedSurfel, cutoff: float = CUTOFF, index: int = -1
) -> Optional[SplatHit]:
    """
    Solve origin + t·dir = μ + u·h₁ + v·h₂; a hit needs t > t_near and
    u² + v² <= cutoff².
    """
    o = np.asarray(origin, dtype=np.float64)
    d = np.asarray(direction, dtype=np.float64)
    h1, h2 = ds.H[:, 0], ds.H[:, 1]
    n = np.cross(h1, h2)
    nn = float(n @ n)
    if nn == 0.0:
        return None
    denom = float(d @ n)
    if abs(denom) <= EPS_PARALLEL * np.sqrt(nn):
        return None
    t = float((ds.mu - o) @ n) / denom
    if not t > T_NEAR:
        return None
    p = o + t * d - ds.mu
    u = float(p @ np.cross(h2, n)) / nn
    v = float(p @ np.cross(n, h1)) / nn
    r2 = u * u + v * v
    if r2 > cutoff * cutoff:
        return None
    G = float(np.exp(-0.5 * r2))
    return SplatHit(index=index, u=u, v=v, t=t, G=G, alpha_eff=ds.alpha * G)


def oriented_normal(n_d, view_dir) -> np.ndarray:
    """n_d flipped, if needed, to face against the ray."""
    n_d = np.asarray(n_d, dtype=np.float64)
    return -n_d if float(n_d @ np.asarray(view_dir, dtype=np.float64)) > 0.0 else n_d


def surfel_colors(
    surfels: Sequence[DeformedSurfel],
    camera_position,
    head: Optional[SpecularHead] = None,
    specular_eye_only: bool = False,
) -> np.ndarray:
    """Per-surfel RGB clamped to [0, 1]; view direction from the camera to μ."""
    colors = np.zeros((len(surfels), 3))
    cam = np.asarray(camera_position, dtype=np.float64)
    for i, s in enumerate(surfels):
        d = s.mu - cam
        norm = np.linalg.norm(d)
        d = d / norm if norm > 0.0 else np.array([0.0, 0.0, 1.0])
        n_local = s.U_b.T @ s.n_d
        n_local = n_local / np.linalg.norm(n_local)
        use_head = head if (head is not None and (s.eye_flag or not specular_eye_only)) else None
        colors[i] = total_color(s.sh, use_head, d, s.U_b, n_local)
    return np.clip(colors, 0.0, 1.0)


def composite_pixel(
    hits: Sequence[SplatHit],
    surfels: Sequence[DeformedSurfel],
    view_dir,
    background,
    colors: Optional[np.ndarray] = None,
    far: float = 100.0,
    head: Optional[SpecularHead] = None,
    specular_eye_only: bool = False,
) -> PixelRecord:
    """
    Front-to-back compositing C = Σ cᵢ αᵢGᵢ Πⱼ<ᵢ (1 − αⱼGⱼ) over hits sorted by t.

    ``colors`` indexed by SplatHit.index; when omitted each hit is shaded with
    total_color along the ray direction ``view_dir``, adding the specular term
    of ``head`` (all surfels, or eye surfels only with ``specular_eye_only``).
    With ``head=None`` the pixel is diffuse SH only. ``head`` is ignored when
    ``colors`` is given.
    """
    ordered = sorted(hits, key=lambda h: (h.t, h.index))
    bg = np.asarray(background, dtype=np.float64)
    d = np.asarray(view_dir, dtype=np.float64)
    d = d / np.linalg.norm(d)
    T = 1.0
    color = np.zeros(3)
    record = PixelRecord(color=color, depth=far, normal=np.zeros(3), transmittance=1.0)
    normal_acc = np.zeros(3)
    depth_acc = 0.0
    for hit in ordered:
        if T < MIN_TRANSMITTANCE:
            break
        s = surfels[hit.index]
        if colors is not None:
            c = colors[hit.index]
        else:
            n_local = s.U_b.T @ s.n_d
            use_head = head if (head is not None and (s.eye_flag or not specular_eye_only)) else None
            c = np.clip(total_color(s.sh, use_head, d, s.U_b, n_local / np.linalg.norm(n_local)), 0.0, 1.0)
        w = hit.alpha_eff * T
        color = color + w * np.asarray(c, dtype=np.float64)
        n_hit = oriented_normal(s.n_d, view_dir)
        normal_acc += w * n_hit
        depth_acc += w * hit.t
        record.weights.append(w)
        record.depths.append(hit.t)
        record.normals.append(n_hit)
        record.indices.append(hit.index)
        T *= 1.0 - hit.alpha_eff

    total_w = float(sum(record.weights))
    record.color = color + T * bg
    record.transmittance = T
    if total_w > 0.0:
        record.depth = depth_acc / total_w
        norm = np.linalg.norm(normal_acc)
        record.normal = normal_acc / norm if norm > 0.0 else normal_acc
    return record


def _dot_rows(vecs: np.ndarray, dirs: np.ndarray) -> np.ndarray:
    """(S, 3) x (P, 3) -> (S, P) dot products, elementwise so bands match bit for bit."""
    return (
        vecs[:, 0:1] * dirs[None, :, 0]
        + vecs[:, 1:2] * dirs[None, :, 1]
        + vecs[:, 2:3] * dirs[None, :, 2]
    )


def _render_rows(
    origin: np.ndarray,
    dirs: np.ndarray,
    mus: np.ndarray,
    h1s: np.ndarray,
    h2s: np.ndarray,
    normals: np.ndarray,
    alphas: np.ndarray,
    colors: np.ndarray,
    background: np.ndarray,
    cutoff: float,
    far: float,
):
    """Render a flat batch of P rays against S splats."""
    P = dirs.shape[0]
    S = mus.shape[0]
    if S == 0:
        empty = np.zeros((0, P))
        return (
            np.tile(background, (P, 1)), np.full(P, far), np.zeros((P, 3)), np.ones(P),
            empty, empty.copy(), np.zeros((0, P, 3)), np.zeros((0, P), dtype=np.int64),
        )

    n = np.cross(h1s, h2s)                                   # (S, 3)
    nn = np.einsum("ij,ij->i", n, n)                         # (S,)
    denom = _dot_rows(n, dirs)                               # (S, P)
    num = np.einsum("ij,ij->i", mus - origin, n)             # (S,)
    parallel = np.abs(denom) <= EPS_PARALLEL * np.sqrt(nn)[:, None]
    with np.errstate(divide="ignore", invalid="ignore"):
        t = num[:, None] / denom
        a_u = np.cross(h2s, n) / nn[:, None]
        a_v = np.cross(n, h1s) / nn[:, None]
    rel = origin - mus                                       # p = rel + t·d
    with np.errstate(invalid="ignore", over="ignore"):
        u = np.einsum("ij,ij->i", rel, a_u)[:, None] + t * _dot_rows(a_u, dirs)
        v = np.einsum("ij,ij->i", rel, a_v)[:, None] + t * _dot_rows(a_v, dirs)
        r2 = u * u + v * v
        valid = (~parallel) & (t > T_NEAR) & (r2 <= cutoff * cutoff) & (nn[:, None] > 0.0)
    t = np.where(valid, t, np.inf)
    alpha_eff = np.where(valid, alphas[:, None] * np.exp(-0.5 * np.where(valid, r2, 0.0)), 0.0)

    order = np.argsort(t, axis=0, kind="stable")             # ties keep surfel order
    counts = valid.sum(axis=0)
    K = int(counts.max()) if P else 0
    cols = np.arange(P)

    T = np.ones(P)
    color = np.zeros((P, 3))
    normal_acc = np.zeros((P, 3))
    depth_acc = np.zeros(P)
    weights = np.zeros((K, P))
    depths = np.zeros((K, P))
    hit_normals = np.zeros((K, P, 3))
    hit_index = np.full((K, P), -1, dtype=np.int64)
    facing = _dot_rows(normals, dirs)                        # (S, P)

    for k in range(K):
        idx = order[k]
        present = k < counts
        active = present & (T >= MIN_TRANSMITTANCE)
        a = np.where(active, alpha_eff[idx, cols], 0.0)
        w = a * T
        n_hit = np.where((facing[idx, cols] > 0.0)[:, None], -normals[idx], normals[idx])
        color += w[:, None] * colors[idx]
        normal_acc += w[:, None] * n_hit
        t_k = np.where(active, t[idx, cols], 0.0)
        depth_acc += w * t_k
        weights[k] = w
        depths[k] = t_k
        hit_normals[k] = np.where(active[:, None], n_hit, 0.0)
        hit_index[k] = np.where(active, idx, -1)
        T = T * (1.0 - a)

    total_w = weights.sum(axis=0)
    covered = total_w > 0.0
    depth = np.full(P, far)
    depth[covered] = depth_acc[covered] / total_w[covered]
    norm = np.linalg.norm(normal_acc, axis=1)
    normal = np.zeros((P, 3))
    ok = norm > 0.0
    normal[ok] = normal_acc[ok] / norm[ok, None]
    color = color + T[:, None] * background[None, :]
    return color, depth, normal, T, weights, depths, hit_normals, hit_index


def _pad_layers(arr: np.ndarray, K: int, fill) -> np.ndarray:
    if arr.shape[0] == K:
        return arr
    pad = np.full((K - arr.shape[0],) + arr.shape[1:], fill, dtype=arr.dtype)
    return np.concatenate([arr, pad], axis=0)


@trace_function("surfrig.render")
def render(
    surfels_deformed: Sequence[DeformedSurfel],
    camera: Camera,
    background=(0.0, 0.0, 0.0),
    head: Optional[SpecularHead] = None,
    specular_eye_only: bool = False,
    threads: int = 1,
    cutoff: float = CUTOFF,
) -> RenderBuffers:
    """
    Render color, expected depth, normal and transmittance buffers.

    Rows are split into bands rendered independently; the output does not
    depend on ``threads``.

    Raises:
        InvalidCamera: camera parameters are out of range.
    """
    started = time.perf_counter()
    validate_camera(camera)
    H, W = camera.height, camera.width
    bg = np.asarray(background, dtype=np.float64).reshape(3)
    dirs = ray_directions(camera).reshape(-1, 3)
    surfels = list(surfels_deformed)

    mus = np.array([s.mu for s in surfels]).reshape(-1, 3)
    h1s = np.array([s.H[:, 0] for s in surfels]).reshape(-1, 3)
    h2s = np.array([s.H[:, 1] for s in surfels]).reshape(-1, 3)
    normals = np.array([s.n_d for s in surfels]).reshape(-1, 3)
    alphas = np.array([s.alpha for s in surfels], dtype=np.float64)
    colors = surfel_colors(surfels, camera.position, head, specular_eye_only).reshape(-1, 3)

    n_bands = max(1, min(int(threads), H))
    bounds = np.linspace(0, H, n_bands + 1).astype(int)
    bands = [(bounds[i] * W, bounds[i + 1] * W) for i in range(n_bands)]

    def run(band):
        lo, hi = band
        return _render_rows(camera.position, dirs[lo:hi], mus, h1s, h2s, normals, alphas, colors, bg, cutoff, camera.far)

    if n_bands == 1:
        parts = [run(bands[0])]
    else:
        with ThreadPoolExecutor(max_workers=n_bands) as pool:
            parts = list(pool.map(run, bands))

    K = max(p[4].shape[0] for p in parts)
    color = np.concatenate([p[0] for p in parts]).reshape(H, W, 3)
    depth = np.concatenate([p[1] for p in parts]).reshape(H, W)
    normal = np.concatenate([p[2] for p in parts]).reshape(H, W, 3)
    T = np.concatenate([p[3] for p in parts]).reshape(H, W)
    weights = np.concatenate([_pad_layers(p[4], K, 0.0) for p in parts], axis=1).reshape(K, H, W)
    depths = np.concatenate([_pad_layers(p[5], K, 0.0) for p in parts], axis=1).reshape(K, H, W)
    hit_normals = np.concatenate([_pad_layers(p[6], K, 0.0) for p in parts], axis=1).reshape(K, H, W, 3)
    hit_index = np.concatenate([_pad_layers(p[7], K, -1) for p in parts], axis=1).reshape(K, H, W)

    metrics.RENDERS.inc()
    metrics.RENDER_SECONDS.observe(time.perf_counter() - started)
    logger.debug(f"rendered {len(surfels)} surfels at {W}x{H} with {n_bands} band(s)")
    return RenderBuffers(
        color=color,
        depth=depth,
        normal=normal,
        transmittance=T,
        hit_weights=weights,
        hit_depths=depths,
        hit_normals=hit_normals,
        hit_index=hit_index,
        far=camera.far,
    )
