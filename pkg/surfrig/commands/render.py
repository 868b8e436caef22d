"""
render: deform (when a deformed mesh is given), render and write PNG buffers.
"""

from surfrig.commands.common import CommandContext, emit, load_deformed, require_canonical, rig_inputs
from surfrig.core.logging import get_logger
from surfrig.core.tracing import trace_function
from surfrig.geometry.mesh import validate_pair
from surfrig.io.images import save_buffers
from surfrig.render.rasterizer import render
from surfrig.rig.skinning import PoseRig
from surfrig.schemas.run_config import RunConfig

logger = get_logger(__name__)

NAME = "render"
HELP = "render color, depth, normal and transmittance images"


@trace_function("surfrig.command.render")
def run(config: RunConfig, ctx: CommandContext) -> int:
    camera = config.camera.to_camera()
    canonical = require_canonical(config)
    deformed = load_deformed(config, canonical)
    if deformed is not canonical:
        validate_pair(canonical, deformed)
    inputs = rig_inputs(config, canonical, ctx.seed)

    surfels = PoseRig(canonical, deformed).deform(inputs.surfels, inputs.topology)
    buffers = render(
        surfels,
        camera,
        background=config.background,
        head=inputs.head,
        specular_eye_only=config.appearance.specular_eye_only,
        threads=ctx.threads,
    )
    paths = save_buffers(buffers, ctx.out_dir, camera.near, camera.far)
    residual = buffers.closure_residual()
    logger.info(f"rendered {len(surfels)} surfels, closure residual {residual:.3e}", extra={"command": NAME})
    emit(ctx, {
        "command": NAME,
        "n_surfels": len(surfels),
        "closure_residual": residual,
        "files": sorted(p.name for p in paths.values()),
    })
    return 0
