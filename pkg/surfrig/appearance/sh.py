"""
Real spherical harmonics up to degree 3 for diffuse color.

Constants and basis ordering follow the usual splatting convention
(l ascending, m ascending within l).
"""

import numpy as np

SH_C0 = 0.28209479177387814
SH_C1 = 0.4886025119029199
SH_C2 = (
    1.0925484305920792,
    -1.0925484305920792,
    0.31539156525252005,
    -1.0925484305920792,
    0.5462742152960396,
)
SH_C3 = (
    -0.5900435899266435,
    2.890611442640554,
    -0.4570457994644658,
    0.3731763325901154,
    -0.4570457994644658,
    1.445305721320277,
    -0.5900435899266435,
)
MAX_DEGREE = 3


def sh_coefficient_count(degree: int) -> int:
    if not 0 <= degree <= MAX_DEGREE:
        raise ValueError(f"SH degree must be in [0, {MAX_DEGREE}], got {degree}")
    return (degree + 1) ** 2


def sh_degree_of(coefficients) -> int:
    return int(round(np.sqrt(np.asarray(coefficients).shape[-1]))) - 1


def sh_basis(degree: int, d) -> np.ndarray:
    """Basis values (..., (degree+1)**2) at unit directions d (..., 3)."""
    d = np.asarray(d, dtype=np.float64)
    x, y, z = d[..., 0], d[..., 1], d[..., 2]
    out = [np.full_like(x, SH_C0)]
    if degree > 0:
        out += [-SH_C1 * y, SH_C1 * z, -SH_C1 * x]
    if degree > 1:
        xx, yy, zz = x * x, y * y, z * z
        xy, yz, xz = x * y, y * z, x * z
        out += [
            SH_C2[0] * xy,
            SH_C2[1] * yz,
            SH_C2[2] * (2.0 * zz - xx - yy),
            SH_C2[3] * xz,
            SH_C2[4] * (xx - yy),
        ]
        if degree > 2:
            out += [
                SH_C3[0] * y * (3 * xx - yy),
                SH_C3[1] * xy * z,
                SH_C3[2] * y * (4 * zz - xx - yy),
                SH_C3[3] * z * (2 * zz - 3 * xx - 3 * yy),
                SH_C3[4] * x * (4 * zz - xx - yy),
                SH_C3[5] * z * (xx - yy),
                SH_C3[6] * x * (xx - 3 * yy),
            ]
    return np.stack(out, axis=-1)


def eval_sh(block, d_rot) -> np.ndarray:
    """
    RGB diffuse color for one direction, clamped at 0 per channel.

    Args:
        block: SHBlock or raw coefficients of shape (3, (L+1)**2)
        d_rot: unit view direction in the surfel's canonical frame
    """
    coeffs = np.asarray(getattr(block, "coefficients", block), dtype=np.float64)
    degree = sh_degree_of(coeffs)
    basis = sh_basis(degree, d_rot)
    return np.maximum(coeffs @ basis, 0.0)
