"""
Jacobian deformation gradients, Jacobian Blend Skinning and surfel deformation.
"""

from dataclasses import dataclass
from typing import List, Sequence

import numpy as np
from numpy.typing import NDArray

from surfrig.core.errors import NearPiRotation, SingularOrInverted
from surfrig.geometry.mat3 import (
    DEFAULT_TOL,
    Mat3,
    PolarFactors,
    Vec3,
    as_mat3,
    inverse_transpose,
    polar_decompose,
    rotation_exp,
    rotation_log,
)
from surfrig.geometry.mesh import build_frames
from surfrig.models.mesh import TriangleFrame, TriMesh
from surfrig.models.surfel import BlendTopology, DeformedSurfel, Surfel


def jacobian(E, E_def, tol: float = DEFAULT_TOL) -> Mat3:
    """Deformation gradient J = Ẽ E⁻¹ (so that J E = Ẽ)."""
    E = as_mat3(E)
    E_def = as_mat3(E_def)
    # E⁻¹ = (E⁻ᵀ)ᵀ; raises SingularMatrix for a singular E
    return E_def @ inverse_transpose(E, tol).T


def blend_weights(logits) -> NDArray[np.float64]:
    """Sigmoid activation followed by normalization onto the simplex."""
    z = np.asarray(logits, dtype=np.float64)
    decay = np.exp(-np.abs(z))
    sig = np.where(z >= 0.0, 1.0, decay) / (1.0 + decay)
    return sig / np.sum(sig)


@dataclass(frozen=True)
class JacobianFactors:
    """Cached polar factors of one triangle's Jacobian plus log(U)."""

    J: Mat3
    polar: PolarFactors
    log_U: Vec3


def factorize(J, neighbor: int = None, tol: float = DEFAULT_TOL) -> JacobianFactors:
    try:
        polar = polar_decompose(J, tol)
        log_U = rotation_log(polar.U)
    except SingularOrInverted as e:
        raise SingularOrInverted(e.detail, neighbor=neighbor) from e
    except NearPiRotation as e:
        raise NearPiRotation(e.detail, neighbor=neighbor) from e
    return JacobianFactors(J=as_mat3(J), polar=polar, log_U=log_U)


def jbs_factors(factors: Sequence[JacobianFactors], weights) -> PolarFactors:
    """Blend precomputed factors: U_b = exp(Σ wᵢ log Uᵢ), P_b = Σ wᵢ Pᵢ."""
    w = np.asarray(weights, dtype=np.float64)
    if len(factors) != len(w):
        raise ValueError(f"{len(factors)} Jacobians but {len(w)} weights")
    omega = np.zeros(3)
    P_b = np.zeros((3, 3))
    for wi, f in zip(w, factors):
        omega += wi * f.log_U
        P_b += wi * f.polar.P
    return PolarFactors(U=rotation_exp(omega), P=0.5 * (P_b + P_b.T))


def jbs(jacobians: Sequence, weights, tol: float = DEFAULT_TOL) -> Mat3:
    """
    Jacobian Blend Skinning of neighbor Jacobians.

    Raises:
        SingularOrInverted / NearPiRotation: tagged with the offending neighbor index.
    """
    factors = [factorize(J, neighbor=i, tol=tol) for i, J in enumerate(jacobians)]
    blended = jbs_factors(factors, weights)
    return blended.U @ blended.P


def lerp_blend(jacobians: Sequence, weights) -> Mat3:
    """Element-wise weighted sum Σ wᵢ Jᵢ."""
    w = np.asarray(weights, dtype=np.float64)
    out = np.zeros((3, 3))
    for wi, J in zip(w, jacobians):
        out += wi * as_mat3(J)
    return out


def deform_normal(n_c, J_b, tol: float = DEFAULT_TOL) -> Vec3:
    """n_d = normalize(J_b⁻ᵀ n_c)."""
    n = inverse_transpose(J_b, tol) @ np.asarray(n_c, dtype=np.float64)
    return n / np.linalg.norm(n)


def rotate_view_dir(d, U_b) -> Vec3:
    """d_rot = U_bᵀ d."""
    return as_mat3(U_b).T @ np.asarray(d, dtype=np.float64)


def deform_surfel(s: Surfel, J_b, T_p, U_b=None, tol: float = DEFAULT_TOL) -> DeformedSurfel:
    """
    Σ^½ = J_b R_c S_c and μ = J_b μ_c + T_p, normal by the inverse-transpose rule.

    ``U_b`` may be passed when the blended rotation is already known;
    otherwise it is recovered from polar_decompose(J_b).
    """
    J_b = as_mat3(J_b)
    n_d = deform_normal(s.normal, J_b, tol)
    if U_b is None:
        U_b = polar_decompose(J_b, tol).U
    return DeformedSurfel(
        mu=J_b @ s.mu_c + np.asarray(T_p, dtype=np.float64),
        H=J_b @ s.R_c @ s.S_c,
        n_d=n_d,
        alpha=s.alpha,
        sh=s.sh,
        U_b=as_mat3(U_b),
        eye_flag=s.eye_flag,
    )


class PoseRig:
    """
    Per-pose Jacobian cache.

    Built once for a (canonical, deformed) mesh pair: one Jacobian and one
    polar factorization per triangle. Blended Jacobians per triangle are then
    derived from a BlendTopology. Immutable after construction.
    """

    def __init__(
        self,
        canonical: TriMesh,
        deformed: TriMesh,
        canonical_frames: List[TriangleFrame] = None,
        tol: float = DEFAULT_TOL,
    ):
        self.tol = tol
        self.canonical_frames = canonical_frames or build_frames(canonical)
        self.deformed_frames = build_frames(deformed)
        self.jacobians = [
            jacobian(c.E, d.E, tol) for c, d in zip(self.canonical_frames, self.deformed_frames)
        ]
        self._factors = [None] * len(self.jacobians)

    def factors(self, face: int) -> JacobianFactors:
        if self._factors[face] is None:
            self._factors[face] = factorize(self.jacobians[face], neighbor=face, tol=self.tol)
        return self._factors[face]

    def blended(self, topology: BlendTopology) -> List[PolarFactors]:
        """(U_b, P_b) for every triangle."""
        out = []
        for face, neighbors in enumerate(topology.adjacency.neighbors):
            weights = blend_weights(topology.logits[face])
            out.append(jbs_factors([self.factors(n) for n in neighbors], weights))
        return out

    def lerp_blended(self, topology: BlendTopology) -> List[Mat3]:
        out = []
        for face, neighbors in enumerate(topology.adjacency.neighbors):
            weights = blend_weights(topology.logits[face])
            out.append(lerp_blend([self.jacobians[n] for n in neighbors], weights))
        return out

    def deform(self, surfels: Sequence[Surfel], topology: BlendTopology = None) -> List[DeformedSurfel]:
        """
        Deform all surfels. Without a topology every triangle uses its own
        Jacobian unblended.
        """
        if topology is None:
            per_face = [PolarFactors(U=self.factors(f).polar.U, P=self.factors(f).polar.P)
                        for f in range(len(self.jacobians))]
        else:
            per_face = self.blended(topology)
        out = []
        for s in surfels:
            pf = per_face[s.parent]
            out.append(deform_surfel(s, pf.U @ pf.P, self.deformed_frames[s.parent].T_p, U_b=pf.U, tol=self.tol))
        return out
