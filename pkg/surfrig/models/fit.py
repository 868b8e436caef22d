from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional

import numpy as np
from numpy.typing import NDArray

from surfrig.models.appearance import SpecularHead
from surfrig.models.mesh import TriMesh
from surfrig.models.render import Camera
from surfrig.models.surfel import BlendTopology, Surfel


@dataclass(frozen=True)
class View:
    """One observation: a pose of the mesh, a camera and the target image."""

    camera: Camera
    target: NDArray[np.float64]
    deformed: Optional[TriMesh] = None


@dataclass(frozen=True)
class Scene:
    canonical: TriMesh
    surfels: List[Surfel]
    topology: BlendTopology
    views: List[View] = field(default_factory=list)
    head: Optional[SpecularHead] = None
    background: tuple = (0.0, 0.0, 0.0)
    specular_eye_only: bool = False

    def with_changes(self, **changes) -> "Scene":
        return replace(self, **changes)


@dataclass
class FitState:
    """Optimizer progress; ``scene`` is the parameter snapshot of the last accepted step."""

    iteration: int
    loss: float
    terms: Dict[str, float]
    scene: Scene
    step_scale: float = 1.0
    step_sizes: Dict[str, float] = field(default_factory=dict)
    initial_loss: float = 0.0
    initial_terms: Dict[str, float] = field(default_factory=dict)
    accepted_steps: int = 0
    history: List[float] = field(default_factory=list)
