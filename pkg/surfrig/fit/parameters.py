"""
Flat parameter vectors over a Scene, grouped for per-group step sizes.

Groups: ``color`` (SH DC terms), ``sh_rest`` (higher SH bands), ``opacity``,
``blend`` (JBS logits), ``specular`` (lobe ξ/λ/μ as inverse-softplus values,
and the output layer),
``position`` (μ_c), ``rotation`` (axis-angle delta on R_c) and ``scale``
(log tangent scales). Entries that are not moved keep their original arrays,
so frozen parameters come back bit-identical.
"""

from dataclasses import dataclass, replace
from typing import Dict, List, Sequence

import numpy as np

from surfrig.appearance.specular import replace_lobe_params
from surfrig.geometry.mat3 import rotation_exp
from surfrig.models.fit import Scene
from surfrig.schemas.run_config import PARAMETER_GROUPS

DEFAULT_STEP_SIZES: Dict[str, float] = {
    "color": 0.5,
    "sh_rest": 0.1,
    "opacity": 0.2,
    "blend": 1.0,
    "specular": 0.1,
    "position": 0.01,
    "rotation": 0.05,
    "scale": 0.1,
}

SURFEL_GROUPS = ("color", "sh_rest", "opacity", "position", "rotation", "scale")
FROZEN_FOR_EYES = ("position", "rotation")


@dataclass(frozen=True)
class Slot:
    group: str
    owner: int          # surfel index, -1 for shared parameters
    start: int
    stop: int


class ParameterLayout:
    """
    Maps a Scene's trainable parameters onto one flat vector.

    The layout is bound to the scene it was built from; ``unpack`` rebuilds
    scenes relative to that base.
    """

    def __init__(self, scene: Scene, groups: Sequence[str], freeze_eye: bool = True):
        unknown = [g for g in groups if g not in PARAMETER_GROUPS]
        if unknown:
            raise ValueError(f"unknown parameter groups: {unknown}")
        self.base = scene
        self.groups = [g for g in PARAMETER_GROUPS if g in set(groups)]
        self.freeze_eye = freeze_eye
        self.slots: List[Slot] = []
        chunks: List[np.ndarray] = []
        cursor = 0

        def add(group: str, owner: int, values) -> None:
            nonlocal cursor
            values = np.asarray(values, dtype=np.float64).ravel()
            if values.size == 0:
                return
            self.slots.append(Slot(group, owner, cursor, cursor + values.size))
            chunks.append(values)
            cursor += values.size

        for group in self.groups:
            if group in SURFEL_GROUPS:
                for i, s in enumerate(scene.surfels):
                    if freeze_eye and s.eye_flag and group in FROZEN_FOR_EYES:
                        continue
                    add(group, i, _surfel_values(group, s))
            elif group == "blend":
                add(group, -1, scene.topology.flat_logits())
            elif group == "specular" and scene.head is not None:
                head = scene.head
                add(group, -1, np.concatenate([
                    inverse_softplus([lobe.xi for lobe in head.lobes]),
                    inverse_softplus([lobe.lam for lobe in head.lobes]),
                    inverse_softplus([lobe.mu for lobe in head.lobes]),
                    head.W3.ravel(),
                    head.b3.ravel(),
                ]))

        self.x0 = np.concatenate(chunks) if chunks else np.zeros(0)

    @property
    def size(self) -> int:
        return int(self.x0.size)

    def group_indices(self) -> Dict[str, np.ndarray]:
        out: Dict[str, List[int]] = {g: [] for g in self.groups}
        for slot in self.slots:
            out[slot.group].extend(range(slot.start, slot.stop))
        return {g: np.asarray(idx, dtype=np.int64) for g, idx in out.items() if idx}

    def unpack(self, x) -> Scene:
        x = np.asarray(x, dtype=np.float64)
        surfels = list(self.base.surfels)
        topology = self.base.topology
        head = self.base.head
        changes: Dict[int, Dict[str, np.ndarray]] = {}

        for slot in self.slots:
            values = x[slot.start:slot.stop]
            if np.array_equal(values, self.x0[slot.start:slot.stop]):
                continue
            if slot.owner >= 0:
                changes.setdefault(slot.owner, {})[slot.group] = values
            elif slot.group == "blend":
                topology = topology.with_flat_logits(values)
            elif slot.group == "specular":
                head = _unpack_head(head, values)

        for i, groups in changes.items():
            surfels[i] = _apply_surfel(self.base.surfels[i], groups)
        return self.base.with_changes(surfels=surfels, topology=topology, head=head)


def _surfel_values(group: str, s) -> np.ndarray:
    if group == "color":
        return s.sh[:, 0]
    if group == "sh_rest":
        return s.sh[:, 1:]
    if group == "opacity":
        return np.array([s.alpha])
    if group == "position":
        return s.mu_c
    if group == "rotation":
        return np.zeros(3)
    if group == "scale":
        return np.log(s.scales)
    raise ValueError(group)


def _apply_surfel(s, groups: Dict[str, np.ndarray]):
    fields = {}
    if "color" in groups or "sh_rest" in groups:
        sh = s.sh.copy()
        if "color" in groups:
            sh[:, 0] = groups["color"]
        if "sh_rest" in groups:
            sh[:, 1:] = groups["sh_rest"].reshape(3, -1)
        fields["sh"] = sh
    if "opacity" in groups:
        fields["alpha"] = float(np.clip(groups["opacity"][0], 0.0, 1.0))
    if "position" in groups:
        fields["mu_c"] = groups["position"].copy()
    if "rotation" in groups:
        fields["R_c"] = rotation_exp(groups["rotation"]) @ s.R_c
    if "scale" in groups:
        fields["scales"] = np.exp(groups["scale"])
    return replace(s, **fields)


def softplus(x) -> np.ndarray:
    return np.logaddexp(0.0, np.asarray(x, dtype=np.float64))


def inverse_softplus(y, floor: float = 1e-12) -> np.ndarray:
    """log(exp(y) − 1) for y > 0; values below ``floor`` are raised to it."""
    y = np.maximum(np.asarray(y, dtype=np.float64), floor)
    return y + np.log(-np.expm1(-y))


def _unpack_head(head, values: np.ndarray):
    n = len(head.lobes)
    xi = softplus(values[:n])
    lam = softplus(values[n:2 * n])
    mu = softplus(values[2 * n:3 * n])
    w3_size = head.W3.size
    W3 = values[3 * n:3 * n + w3_size].reshape(head.W3.shape)
    b3 = values[3 * n + w3_size:].reshape(head.b3.shape)
    return replace_lobe_params(head, xi=xi, lam=lam, mu=mu).with_params(W3=W3.copy(), b3=b3.copy())
