"""
Anisotropic spherical Gaussian lobes and reflection.
"""

import math
from typing import List

import numpy as np

from surfrig.geometry.mat3 import rotation_exp
from surfrig.models.appearance import ASGLobe


def eval_asg(lobe: ASGLobe, nu) -> float:
    """ξ · max(ν·z, 0) · exp(−λ(ν·x)² − μ(ν·y)²)."""
    nu = np.asarray(nu, dtype=np.float64)
    smooth = max(float(nu @ lobe.z), 0.0)
    if smooth == 0.0:
        return 0.0
    ax = float(nu @ lobe.x)
    ay = float(nu @ lobe.y)
    return lobe.xi * smooth * math.exp(-lobe.lam * ax * ax - lobe.mu * ay * ay)


def eval_asg_terms(lobe: ASGLobe, nu):
    """(value, d/dξ, d/dλ, d/dμ) of :func:`eval_asg`."""
    nu = np.asarray(nu, dtype=np.float64)
    smooth = max(float(nu @ lobe.z), 0.0)
    ax = float(nu @ lobe.x)
    ay = float(nu @ lobe.y)
    shape = smooth * math.exp(-lobe.lam * ax * ax - lobe.mu * ay * ay)
    value = lobe.xi * shape
    return value, shape, -value * ax * ax, -value * ay * ay


def reflect(d_rot, n) -> np.ndarray:
    """ω_o = 2(d_rot·n)n − d_rot."""
    d_rot = np.asarray(d_rot, dtype=np.float64)
    n = np.asarray(n, dtype=np.float64)
    return 2.0 * float(d_rot @ n) * n - d_rot


def spherical_direction(theta: float, phi: float) -> np.ndarray:
    """Unit vector at polar angle θ from +z and azimuth φ."""
    return np.array([
        math.sin(theta) * math.cos(phi),
        math.sin(theta) * math.sin(phi),
        math.cos(theta),
    ])


def sample_lobes(
    grid=(4, 4),
    sharpness: float = 10.0,
    amplitude: float = 1.0,
) -> List[ASGLobe]:
    """
    Lobe axes on a uniform (θ, φ) grid over the frontal hemisphere (z >= 0).

    For an axis at (θ, φ) the tangent is the direction at (θ + π/2, φ) and the
    bitangent is the tangent rotated about the axis by π/2.
    """
    n_theta, n_phi = grid
    lobes = []
    for i in range(n_theta):
        theta = (i + 0.5) / n_theta * (0.5 * math.pi)
        for j in range(n_phi):
            phi = (j + 0.5) / n_phi * (2.0 * math.pi)
            z = spherical_direction(theta, phi)
            x = spherical_direction(theta + 0.5 * math.pi, phi)
            y = rotation_exp(0.5 * math.pi * z) @ x
            lobes.append(ASGLobe(z=z, x=x, y=y, lam=sharpness, mu=sharpness, xi=amplitude))
    return lobes
