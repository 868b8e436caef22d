from dataclasses import dataclass, field
from typing import List

import numpy as np
from numpy.typing import NDArray


@dataclass(frozen=True)
class Camera:
    """Pinhole camera; fov_y in degrees, image size in pixels."""

    position: NDArray[np.float64]
    look_at: NDArray[np.float64]
    up: NDArray[np.float64]
    fov_y: float
    width: int
    height: int
    near: float = 0.01
    far: float = 100.0

    def __post_init__(self):
        for name in ("position", "look_at", "up"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=np.float64).reshape(3))


@dataclass(frozen=True)
class SplatHit:
    index: int
    u: float
    v: float
    t: float
    G: float
    alpha_eff: float


@dataclass
class PixelRecord:
    color: NDArray[np.float64]
    depth: float
    normal: NDArray[np.float64]
    transmittance: float
    weights: List[float] = field(default_factory=list)
    depths: List[float] = field(default_factory=list)
    normals: List[NDArray[np.float64]] = field(default_factory=list)
    indices: List[int] = field(default_factory=list)


@dataclass
class RenderBuffers:
    """
    Image buffers plus per-pixel hit layers sorted front to back.

    color (H, W, 3); depth, transmittance (H, W); normal (H, W, 3), zero where
    nothing was hit. Layers: hit_weights/hit_depths (K, H, W),
    hit_normals (K, H, W, 3), hit_index (K, H, W) with -1 padding.
    """

    color: NDArray[np.float64]
    depth: NDArray[np.float64]
    normal: NDArray[np.float64]
    transmittance: NDArray[np.float64]
    hit_weights: NDArray[np.float64]
    hit_depths: NDArray[np.float64]
    hit_normals: NDArray[np.float64]
    hit_index: NDArray[np.int64]
    far: float = 100.0

    @property
    def shape(self):
        return self.depth.shape

    @property
    def weight_sum(self) -> NDArray[np.float64]:
        return self.hit_weights.sum(axis=0)

    @property
    def covered(self) -> NDArray[np.bool_]:
        return self.weight_sum > 0.0

    def closure_residual(self) -> float:
        """max |Σω + T − 1| over pixels."""
        return float(np.max(np.abs(self.weight_sum + self.transmittance - 1.0)))
