"""
Binding of canonical surfels to parent triangles.
"""

from typing import Iterable, List, Optional

import numpy as np

from surfrig.appearance.sh import SH_C0, sh_coefficient_count
from surfrig.geometry.mesh import build_ga_frame, mean_edge_length
from surfrig.models.mesh import TriMesh
from surfrig.models.surfel import Surfel


def bind_surfels(
    mesh: TriMesh,
    per_triangle: int,
    rng_seed: int,
    sh_degree: int = 3,
    alpha: float = 1.0,
    base_color: float = 0.5,
    eye_faces: Optional[Iterable[int]] = None,
) -> List[Surfel]:
    """
    Bind ``per_triangle`` surfels to every face of ``mesh``.

    The first surfel of a face sits on the barycenter; the others are drawn
    uniformly inside the triangle. Every surfel starts with the parent's frame
    as R_c and scales (ℓ/3, ℓ/3) where ℓ is the parent's mean edge length.
    Surfels on ``eye_faces`` are eye-flagged and always start at the
    barycenter.
    """
    if per_triangle < 1:
        raise ValueError("per_triangle must be >= 1")

    rng = np.random.default_rng(rng_seed)
    eyes = set(int(f) for f in (eye_faces or ()))
    n_coeffs = sh_coefficient_count(sh_degree)

    surfels: List[Surfel] = []
    for face in range(mesh.n_faces):
        v0, v1, v2 = mesh.triangle(face)
        frame = build_ga_frame(v0, v1, v2, face=face)
        ell = mean_edge_length(v0, v1, v2)
        is_eye = face in eyes
        for k in range(per_triangle):
            # draw even for eye faces so the stream does not depend on the eye set
            a, b = rng.random(2)
            if k == 0 or is_eye:
                offset = np.zeros(3)
            else:
                root = np.sqrt(a)
                point = (1.0 - root) * v0 + root * (1.0 - b) * v1 + root * b * v2
                offset = point - frame.T_p
            sh = np.zeros((3, n_coeffs))
            sh[:, 0] = base_color / SH_C0
            surfels.append(
                Surfel(
                    parent=face,
                    mu_c=offset,
                    R_c=frame.R_p.copy(),
                    scales=np.array([ell / 3.0, ell / 3.0]),
                    alpha=float(alpha),
                    sh=sh,
                    eye_flag=is_eye,
                )
            )
    return surfels


def bind_lattice_surfels(
    mesh: TriMesh,
    divisions: int,
    scale_ratio: float = 0.5,
    sh_degree: int = 0,
    alpha: float = 1.0,
    base_color: float = 0.5,
) -> List[Surfel]:
    """
    Deterministic binding on the barycentric lattice v₀ + (i/n)(v₁ − v₀) + (j/n)(v₂ − v₁),
    0 <= j <= i <= n, with isotropic scale ``scale_ratio`` times the longer lattice step.
    """
    if divisions < 1:
        raise ValueError("divisions must be >= 1")

    n_coeffs = sh_coefficient_count(sh_degree)
    surfels: List[Surfel] = []
    for face in range(mesh.n_faces):
        v0, v1, v2 = mesh.triangle(face)
        frame = build_ga_frame(v0, v1, v2, face=face)
        step = max(np.linalg.norm(v1 - v0), np.linalg.norm(v2 - v1)) / divisions
        sigma = scale_ratio * step
        for i in range(divisions + 1):
            for j in range(i + 1):
                point = v0 + (i / divisions) * (v1 - v0) + (j / divisions) * (v2 - v1)
                sh = np.zeros((3, n_coeffs))
                sh[:, 0] = base_color / SH_C0
                surfels.append(
                    Surfel(
                        parent=face,
                        mu_c=point - frame.T_p,
                        R_c=frame.R_p.copy(),
                        scales=np.array([sigma, sigma]),
                        alpha=float(alpha),
                        sh=sh,
                    )
                )
    return surfels
