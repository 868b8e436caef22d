"""
deform: Jacobians and JBS for a mesh pair, deformed surfels plus diagnostics.
"""

import numpy as np

from surfrig.commands.common import CommandContext, emit, load_deformed, require_canonical, rig_inputs, write_json
from surfrig.core.logging import get_logger
from surfrig.core.tracing import trace_function
from surfrig.geometry.mat3 import condition_number, is_psd, orthonormality_residual
from surfrig.geometry.mesh import validate_pair
from surfrig.io.ply import save_deformed_ply
from surfrig.io.surfel_set import save_deformed_set
from surfrig.rig.skinning import PoseRig
from surfrig.schemas.diagnostics import DeformDiagnostics, FaceDiagnostics
from surfrig.schemas.run_config import RunConfig

logger = get_logger(__name__)

NAME = "deform"
HELP = "deform surfels with blended Jacobians and write diagnostics"


def build_diagnostics(rig: PoseRig, topology, n_surfels: int) -> DeformDiagnostics:
    faces = []
    for face, blended in enumerate(rig.blended(topology)):
        J_b = blended.U @ blended.P
        residual, _ = orthonormality_residual(blended.U)
        faces.append(FaceDiagnostics(
            face=face,
            det_jacobian=float(np.linalg.det(rig.jacobians[face])),
            det_blended=float(np.linalg.det(J_b)),
            condition_number=condition_number(J_b),
            stretch_psd=is_psd(blended.P),
            rotation_residual=residual,
        ))
    dets = [f.det_jacobian for f in faces]
    return DeformDiagnostics(
        n_faces=len(faces),
        n_surfels=n_surfels,
        adjacency=topology.adjacency.mode,
        min_det=min(dets) if dets else 0.0,
        max_det=max(dets) if dets else 0.0,
        max_condition_number=max((f.condition_number for f in faces), default=0.0),
        all_psd=all(f.stretch_psd for f in faces),
        faces=faces,
    )


@trace_function("surfrig.command.deform")
def run(config: RunConfig, ctx: CommandContext) -> int:
    canonical = require_canonical(config)
    deformed = load_deformed(config, canonical)
    validate_pair(canonical, deformed)
    inputs = rig_inputs(config, canonical, ctx.seed)

    rig = PoseRig(canonical, deformed)
    deformed_surfels = rig.deform(inputs.surfels, inputs.topology)
    diagnostics = build_diagnostics(rig, inputs.topology, len(deformed_surfels))

    out = ctx.out_dir
    save_deformed_set(deformed_surfels, out / "deformed_surfels.json")
    save_deformed_ply(deformed_surfels, out / "deformed_surfels.ply")
    write_json(diagnostics, out / "diagnostics.json")
    logger.info(
        f"deformed {len(deformed_surfels)} surfels over {diagnostics.n_faces} faces",
        extra={"command": NAME},
    )
    emit(ctx, {
        "command": NAME,
        "n_surfels": diagnostics.n_surfels,
        "min_det": diagnostics.min_det,
        "max_det": diagnostics.max_det,
        "max_condition_number": diagnostics.max_condition_number,
        "all_psd": diagnostics.all_psd,
    })
    return 0
