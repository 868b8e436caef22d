"""
Similarity-transform rigging baseline.

Each surfel follows its parent triangle's orthonormal frame and an
isotropic scale (mean of base length and height); stretch and shear are lost.
"""

from typing import List, Sequence

from surfrig.geometry.mesh import build_frames
from surfrig.models.mesh import TriangleFrame, TriMesh
from surfrig.models.surfel import DeformedSurfel, Surfel


def relative_similarity(canonical_frame: TriangleFrame, deformed_frame: TriangleFrame):
    """(R_p, s_p) mapping the canonical frame onto the deformed one."""
    R_rel = deformed_frame.R_p @ canonical_frame.R_p.T
    s_rel = deformed_frame.s_p / canonical_frame.s_p
    return R_rel, s_rel


def ga_deform_surfel(s: Surfel, canonical_frame: TriangleFrame, deformed_frame: TriangleFrame) -> DeformedSurfel:
    """R = R_p R_c, μ = s_p R_p μ_c + T_p, S = s_p S_c; the normal rotates with R_p."""
    R_rel, s_rel = relative_similarity(canonical_frame, deformed_frame)
    return DeformedSurfel(
        mu=s_rel * (R_rel @ s.mu_c) + deformed_frame.T_p,
        H=s_rel * (R_rel @ s.R_c @ s.S_c),
        n_d=R_rel @ s.normal,
        alpha=s.alpha,
        sh=s.sh,
        U_b=R_rel,
        eye_flag=s.eye_flag,
    )


def ga_deform_all(
    surfels: Sequence[Surfel],
    canonical: TriMesh,
    deformed: TriMesh,
    canonical_frames: List[TriangleFrame] = None,
) -> List[DeformedSurfel]:
    canonical_frames = canonical_frames or build_frames(canonical)
    deformed_frames = build_frames(deformed)
    return [
        ga_deform_surfel(s, canonical_frames[s.parent], deformed_frames[s.parent])
        for s in surfels
    ]
