"""
Shared plumbing for the sub-commands: run context, scene inputs and output.
"""

import json
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, List, Optional, TextIO

from pydantic import BaseModel

from surfrig.appearance.specular import init_specular_head
from surfrig.core.errors import DimensionMismatch, InputError
from surfrig.geometry.mesh import build_adjacency, validate_mesh
from surfrig.io.obj import load_obj
from surfrig.io.surfel_set import LoadedSurfelSet, load_surfel_set
from surfrig.models.appearance import SpecularHead
from surfrig.models.mesh import TriMesh
from surfrig.models.surfel import BlendTopology, Surfel
from surfrig.rig.binding import bind_surfels
from surfrig.schemas.run_config import RunConfig


@dataclass
class CommandContext:
    out_dir: Path
    seed: int
    threads: int = 1
    mutate: Optional[str] = None
    stdout: TextIO = field(default_factory=lambda: sys.stdout)


@dataclass
class RigInputs:
    """Canonical surfels with their blend topology and optional specular head."""

    surfels: List[Surfel]
    topology: BlendTopology
    head: Optional[SpecularHead] = None
    loaded: Optional[LoadedSurfelSet] = None


def require_canonical(config: RunConfig) -> TriMesh:
    if config.canonical_mesh is None:
        raise InputError("config needs canonical_mesh for this command")
    mesh = load_obj(config.canonical_mesh)
    validate_mesh(mesh, "canonical")
    return mesh


def load_deformed(config: RunConfig, canonical: TriMesh) -> TriMesh:
    return load_obj(config.deformed_mesh) if config.deformed_mesh is not None else canonical


def rig_inputs(config: RunConfig, mesh: TriMesh, seed: int) -> RigInputs:
    """
    Surfels from ``config.surfel_set`` when given, otherwise freshly bound
    to ``mesh`` with the config's appearance defaults.
    """
    if config.surfel_set is not None:
        loaded = load_surfel_set(config.surfel_set)
        bad = [s.parent for s in loaded.surfels if s.parent >= mesh.n_faces]
        if bad:
            raise DimensionMismatch(
                f"surfel parent {bad[0]} is out of range for a mesh with {mesh.n_faces} faces",
                {"parent": bad[0]},
            )
        adjacency = build_adjacency(mesh, loaded.document.adjacency)
        return RigInputs(loaded.surfels, loaded.topology(adjacency), loaded.head, loaded)

    appearance = config.appearance
    surfels = bind_surfels(
        mesh,
        config.surfels_per_triangle,
        seed,
        sh_degree=appearance.sh_degree,
        alpha=appearance.alpha,
        base_color=appearance.base_color,
        eye_faces=[f for f in config.eye_faces if f < mesh.n_faces],
    )
    head = None
    if appearance.specular:
        head = init_specular_head(seed, grid=appearance.lobe_grid, pe_freqs=appearance.pe_freqs)
    return RigInputs(surfels, BlendTopology.uniform(build_adjacency(mesh, config.adjacency)), head)


def emit(ctx: CommandContext, payload: Any) -> None:
    """Print a command summary as one JSON document on stdout."""
    if isinstance(payload, BaseModel):
        text = payload.model_dump_json()
    else:
        text = json.dumps(payload, sort_keys=True)
    ctx.stdout.write(text + "\n")
    ctx.stdout.flush()


def write_json(payload: BaseModel, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(payload.model_dump_json(indent=2) + "\n", encoding="utf-8")
    return path
