"""
fit: optimize surfel parameters against target images.
"""

from pathlib import Path

from surfrig.commands.common import CommandContext, emit, require_canonical, rig_inputs
from surfrig.core.errors import InputError, IoError
from surfrig.core.logging import get_logger
from surfrig.core.tracing import trace_function
from surfrig.fit.optimizer import fit
from surfrig.io.images import load_image
from surfrig.io.obj import load_obj
from surfrig.io.surfel_set import save_surfel_set, to_document
from surfrig.models.fit import Scene, View
from surfrig.schemas.loss_log import FitSummaryRecord, LossRecord
from surfrig.schemas.run_config import RunConfig

logger = get_logger(__name__)

NAME = "fit"
HELP = "fit surfel color, opacity, blend logits and specular head to targets"

LOSS_LOG = "loss_log.jsonl"
FITTED_SET = "fitted_surfels.json"


def build_scene(config: RunConfig, seed: int):
    canonical = require_canonical(config)
    inputs = rig_inputs(config, canonical, seed)
    if not config.fit.targets:
        raise InputError("fit needs at least one entry in fit.targets")
    views = []
    for target in config.fit.targets:
        camera = (target.camera or config.camera).to_camera()
        deformed = load_obj(target.deformed_mesh) if target.deformed_mesh is not None else None
        views.append(View(camera=camera, target=load_image(target.target), deformed=deformed))
    scene = Scene(
        canonical=canonical,
        surfels=inputs.surfels,
        topology=inputs.topology,
        views=views,
        head=inputs.head,
        background=tuple(config.background),
        specular_eye_only=config.appearance.specular_eye_only,
    )
    return scene, inputs


@trace_function("surfrig.command.fit")
def run(config: RunConfig, ctx: CommandContext) -> int:
    scene, inputs = build_scene(config, ctx.seed)
    out = ctx.out_dir
    out.mkdir(parents=True, exist_ok=True)
    log_path = Path(out) / LOSS_LOG

    try:
        with log_path.open("w", encoding="utf-8") as log_file:
            def record(entry: LossRecord) -> None:
                log_file.write(entry.model_dump_json() + "\n")

            state = fit(
                scene,
                config.energy,
                groups=config.fit.groups,
                iterations=config.fit.iterations,
                step_sizes=config.fit.step_sizes,
                fd_step=config.fit.fd_step,
                max_backtracks=config.fit.max_backtracks,
                threads=ctx.threads,
                on_iteration=record,
            )
            initial_photo = state.initial_terms.get("photometric", 0.0)
            final_photo = state.terms.get("photometric", 0.0)
            summary = FitSummaryRecord(
                iterations=state.iteration,
                accepted_steps=state.accepted_steps,
                initial_loss=state.initial_loss,
                final_loss=state.loss,
                initial_photometric=initial_photo,
                final_photometric=final_photo,
                photometric_ratio=final_photo / initial_photo if initial_photo > 0.0 else 0.0,
            )
            log_file.write(summary.model_dump_json() + "\n")
    except OSError as exc:
        raise IoError(f"cannot write {log_path}: {exc}", {"path": str(log_path)}) from exc

    document = to_document(state.scene.surfels, state.scene.topology, state.scene.head, origin=inputs.loaded)
    save_surfel_set(document, out / FITTED_SET)

    logger.info(
        f"fit finished after {state.iteration} iterations: {state.initial_loss:.6g} -> {state.loss:.6g}",
        extra={"command": NAME, "iteration": state.iteration, "loss": state.loss},
    )
    emit(ctx, {
        "command": NAME,
        "iterations": summary.iterations,
        "accepted_steps": summary.accepted_steps,
        "initial_loss": summary.initial_loss,
        "final_loss": summary.final_loss,
        "photometric_ratio": summary.photometric_ratio,
    })
    return 0
