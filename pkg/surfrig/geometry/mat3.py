"""
Exact 3x3 matrix routines behind all deformation math.

All functions are pure and take/return ``float64`` arrays of shape (3, 3)
(``Mat3``) or (3,) (axis-angle vectors, quaternions are (4,)).
"""

import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np
from numpy.typing import NDArray

from surfrig.core.errors import NearPiRotation, SingularMatrix, SingularOrInverted

Mat3 = NDArray[np.float64]
Vec3 = NDArray[np.float64]

DEFAULT_TOL = 1e-9
BRANCH_EPS = 1e-6
SMALL_ANGLE = 1e-8


@dataclass(frozen=True)
class PolarFactors:
    """M = U @ P with U a proper rotation and P symmetric positive semidefinite."""

    U: Mat3
    P: Mat3


def as_mat3(M) -> Mat3:
    A = np.asarray(M, dtype=np.float64)
    if A.shape != (3, 3):
        raise ValueError(f"expected a 3x3 matrix, got shape {A.shape}")
    return A


def skew(w: Vec3) -> Mat3:
    """Cross-product matrix [w]x."""
    x, y, z = w
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def _scale(M: Mat3) -> float:
    return float(np.max(np.abs(M)))


def _det_threshold(M: Mat3, tol: float) -> float:
    # tol is relative to the largest entry; det scales with its cube
    return tol * _scale(M) ** 3


def polar_decompose(M, tol: float = DEFAULT_TOL) -> PolarFactors:
    """
    Unique polar factorization M = U P of an orientation-preserving matrix.

    P = (MᵀM)^½ via symmetric eigendecomposition, U = M P⁻¹.

    Raises:
        SingularOrInverted: det(M) is at or below the relative tolerance.
    """
    M = as_mat3(M)
    det = float(np.linalg.det(M))
    if not det > _det_threshold(M, tol):
        raise SingularOrInverted(f"matrix is singular or inverted (det={det:.3e})")

    evals, V = np.linalg.eigh(M.T @ M)
    root = np.sqrt(np.clip(evals, 0.0, None))
    P = (V * root) @ V.T
    P = 0.5 * (P + P.T)
    U = M @ ((V / root) @ V.T)
    return PolarFactors(U=U, P=P)


def polar_decompose_newton(M, tol: float = DEFAULT_TOL, max_iter: int = 100) -> PolarFactors:
    """
    Same contract as :func:`polar_decompose`, computed by the scaled Newton
    iteration U <- (zeta U + U^-T / zeta) / 2.
    """
    M = as_mat3(M)
    det = float(np.linalg.det(M))
    if not det > _det_threshold(M, tol):
        raise SingularOrInverted(f"matrix is singular or inverted (det={det:.3e})")

    U = M.copy()
    for _ in range(max_iter):
        U_inv_t = np.linalg.inv(U).T
        zeta = (np.linalg.norm(U_inv_t) / np.linalg.norm(U)) ** 0.5
        U_next = 0.5 * (zeta * U + U_inv_t / zeta)
        converged = np.max(np.abs(U_next - U)) < 1e-14
        U = U_next
        if converged:
            break
    # one unscaled step polishes the last ulps
    U = 0.5 * (U + np.linalg.inv(U).T)
    P = U.T @ M
    P = 0.5 * (P + P.T)
    return PolarFactors(U=U, P=P)


def rotation_exp(w) -> Mat3:
    """Rodrigues' formula; below 1e-8 rad the series limit I + [w]x is used."""
    w = np.asarray(w, dtype=np.float64)
    angle = float(np.linalg.norm(w))
    K = skew(w)
    if angle < SMALL_ANGLE:
        return np.eye(3) + K
    a = math.sin(angle) / angle
    b = (1.0 - math.cos(angle)) / (angle * angle)
    return np.eye(3) + a * K + b * (K @ K)


def rotation_log(R, branch_eps: float = BRANCH_EPS) -> Vec3:
    """
    Principal axis-angle vector of a proper rotation.

    Raises:
        NearPiRotation: trace(R) <= -1 + branch_eps, where the axis sign is ambiguous.
    """
    R = as_mat3(R)
    trace = float(np.trace(R))
    if trace <= -1.0 + branch_eps:
        raise NearPiRotation(f"rotation angle too close to pi (trace={trace:.9f})")

    cos_angle = min(1.0, max(-1.0, 0.5 * (trace - 1.0)))
    angle = math.acos(cos_angle)
    skew_part = np.array([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]])

    if angle < SMALL_ANGLE:
        return 0.5 * skew_part
    if angle < 0.5 * math.pi:
        return angle * skew_part / (2.0 * math.sin(angle))

    # large angles: axis from the symmetric part, sign from the skew part
    B = 0.5 * (R + R.T) - cos_angle * np.eye(3)
    col = int(np.argmax(np.diag(B)))
    axis = B[:, col] / math.sqrt(B[col, col] * (1.0 - cos_angle))
    axis = axis / np.linalg.norm(axis)
    if float(axis @ skew_part) < 0.0:
        axis = -axis
    return angle * axis


def inverse_transpose(M, tol: float = DEFAULT_TOL) -> Mat3:
    """
    (M⁻¹)ᵀ from the cofactor matrix: columns (b×c, c×a, a×b) / det for
    M = [a b c].

    Raises:
        SingularMatrix: |det(M)| is at or below the relative tolerance.
    """
    M = as_mat3(M)
    a, b, c = M[:, 0], M[:, 1], M[:, 2]
    cof = np.column_stack([np.cross(b, c), np.cross(c, a), np.cross(a, b)])
    det = float(a @ cof[:, 0])
    if not abs(det) > _det_threshold(M, tol):
        raise SingularMatrix(f"matrix is singular (det={det:.3e})")
    return cof / det


def is_psd(S, tol: float = DEFAULT_TOL) -> bool:
    """True iff every eigenvalue of the symmetrized input is >= -tol (relative)."""
    S = as_mat3(S)
    S = 0.5 * (S + S.T)
    bound = tol * max(1.0, _scale(S))
    return bool(np.min(np.linalg.eigvalsh(S)) >= -bound)


def rotation_z(angle: float) -> Mat3:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def matrix_to_quaternion(R) -> NDArray[np.float64]:
    """Unit quaternion (w, x, y, z) with w >= 0 for a proper rotation."""
    R = as_mat3(R)
    trace = float(np.trace(R))
    if trace > 0.0:
        s = 2.0 * math.sqrt(trace + 1.0)
        q = np.array([0.25 * s, (R[2, 1] - R[1, 2]) / s, (R[0, 2] - R[2, 0]) / s, (R[1, 0] - R[0, 1]) / s])
    elif R[0, 0] > R[1, 1] and R[0, 0] > R[2, 2]:
        s = 2.0 * math.sqrt(1.0 + R[0, 0] - R[1, 1] - R[2, 2])
        q = np.array([(R[2, 1] - R[1, 2]) / s, 0.25 * s, (R[0, 1] + R[1, 0]) / s, (R[0, 2] + R[2, 0]) / s])
    elif R[1, 1] > R[2, 2]:
        s = 2.0 * math.sqrt(1.0 + R[1, 1] - R[0, 0] - R[2, 2])
        q = np.array([(R[0, 2] - R[2, 0]) / s, (R[0, 1] + R[1, 0]) / s, 0.25 * s, (R[1, 2] + R[2, 1]) / s])
    else:
        s = 2.0 * math.sqrt(1.0 + R[2, 2] - R[0, 0] - R[1, 1])
        q = np.array([(R[1, 0] - R[0, 1]) / s, (R[0, 2] + R[2, 0]) / s, (R[1, 2] + R[2, 1]) / s, 0.25 * s])
    q = q / np.linalg.norm(q)
    return -q if q[0] < 0.0 else q


def quaternion_to_matrix(q) -> Mat3:
    """Rotation matrix of a (w, x, y, z) quaternion; the input is renormalized."""
    q = np.asarray(q, dtype=np.float64)
    w, x, y, z = q / np.linalg.norm(q)
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])


def condition_number(M) -> float:
    return float(np.linalg.cond(as_mat3(M)))


def orthonormality_residual(R) -> Tuple[float, float]:
    """(max |RᵀR − I|, det R) for diagnostics and tests."""
    R = as_mat3(R)
    return float(np.max(np.abs(R.T @ R - np.eye(3)))), float(np.linalg.det(R))
