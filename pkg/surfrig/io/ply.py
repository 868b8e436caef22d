"""
Binary PLY export of deformed surfels for external viewers.
"""

from pathlib import Path
from typing import Sequence

import numpy as np
from plyfile import PlyData, PlyElement

from surfrig.core.errors import IoError
from surfrig.models.surfel import DeformedSurfel

ATTRIBUTES = (
    "x", "y", "z",
    "nx", "ny", "nz",
    "tu_x", "tu_y", "tu_z",
    "tv_x", "tv_y", "tv_z",
    "opacity",
)


def save_deformed_ply(surfels: Sequence[DeformedSurfel], path) -> Path:
    """One vertex per surfel: position, normal, the two scaled tangents and opacity."""
    path = Path(path)
    dtype_full = [(attribute, "f4") for attribute in ATTRIBUTES]
    elements = np.empty(len(surfels), dtype=dtype_full)
    if surfels:
        attributes = np.stack([
            np.concatenate([s.mu, s.n_d, s.H[:, 0], s.H[:, 1], [s.alpha]]) for s in surfels
        ])
        elements[:] = list(map(tuple, attributes))
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        PlyData([PlyElement.describe(elements, "vertex")]).write(str(path))
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}", {"path": str(path)}) from exc
    return path
