from dataclasses import dataclass, field, replace
from typing import List

import numpy as np
from numpy.typing import NDArray


@dataclass(frozen=True)
class ASGLobe:
    """Anisotropic spherical Gaussian: axis z, tangent x, bitangent y."""

    z: NDArray[np.float64]
    x: NDArray[np.float64]
    y: NDArray[np.float64]
    lam: float
    mu: float
    xi: float


@dataclass(frozen=True)
class SHBlock:
    """Real SH coefficients, shape (3, (degree+1)**2)."""

    coefficients: NDArray[np.float64]

    @property
    def degree(self) -> int:
        return int(round(np.sqrt(self.coefficients.shape[-1]))) - 1


@dataclass(frozen=True)
class SpecularHead:
    """
    ASG lobes plus the two-hidden-layer map F.

    Input width is len(lobes) + 6 * pe_freqs + 1; W1 is (hidden1, in),
    W2 is (hidden2, hidden1), W3 is (1, hidden2).
    """

    lobes: List[ASGLobe]
    pe_freqs: int
    W1: NDArray[np.float64]
    b1: NDArray[np.float64]
    W2: NDArray[np.float64]
    b2: NDArray[np.float64]
    W3: NDArray[np.float64]
    b3: NDArray[np.float64]
    hidden: tuple = field(default=(32, 32))

    @property
    def input_dim(self) -> int:
        return len(self.lobes) + 6 * self.pe_freqs + 1

    def with_params(self, **changes) -> "SpecularHead":
        return replace(self, **changes)
