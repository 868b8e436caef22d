from dataclasses import dataclass
from typing import List

import numpy as np
from numpy.typing import NDArray

from surfrig.models.mesh import Adjacency


@dataclass(frozen=True)
class Surfel:
    """
    Canonical 2D Gaussian disk bound to one parent triangle.

    mu_c is a world-frame offset from the canonical parent barycenter;
    R_c = [r1 r2 n]; scales = (s1, s2); the third scale is fixed at 1.
    sh has shape (3, (L+1)**2).
    """

    parent: int
    mu_c: NDArray[np.float64]
    R_c: NDArray[np.float64]
    scales: NDArray[np.float64]
    alpha: float
    sh: NDArray[np.float64]
    eye_flag: bool = False

    @property
    def S_c(self) -> NDArray[np.float64]:
        return np.diag([self.scales[0], self.scales[1], 1.0])

    @property
    def normal(self) -> NDArray[np.float64]:
        return self.R_c[:, 2]


@dataclass(frozen=True)
class DeformedSurfel:
    """World-space surfel: H = Σ^½, unit normal n_d, blended rotation U_b."""

    mu: NDArray[np.float64]
    H: NDArray[np.float64]
    n_d: NDArray[np.float64]
    alpha: float
    sh: NDArray[np.float64]
    U_b: NDArray[np.float64]
    eye_flag: bool = False

    @property
    def covariance(self) -> NDArray[np.float64]:
        return self.H @ self.H.T

    @property
    def tangents(self):
        return self.H[:, 0], self.H[:, 1]


@dataclass
class BlendTopology:
    """Adjacency plus one raw logit per (triangle, neighbor) entry."""

    adjacency: Adjacency
    logits: List[NDArray[np.float64]]

    @classmethod
    def uniform(cls, adjacency: Adjacency) -> "BlendTopology":
        return cls(adjacency, [np.zeros(len(n)) for n in adjacency.neighbors])

    def flat_logits(self) -> NDArray[np.float64]:
        if not self.logits:
            return np.zeros(0)
        return np.concatenate(self.logits)

    def with_flat_logits(self, flat) -> "BlendTopology":
        flat = np.asarray(flat, dtype=np.float64)
        out, start = [], 0
        for row in self.logits:
            out.append(flat[start:start + len(row)].copy())
            start += len(row)
        return BlendTopology(self.adjacency, out)
