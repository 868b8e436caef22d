"""
Desk-scale optimizer: central finite-difference gradients over grouped
parameters, normalized per-group descent directions and a backtracking
line search that only accepts non-increasing losses.
"""

from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from surfrig.core import metrics
from surfrig.core.errors import DivergedLoss, InputError
from surfrig.core.logging import DiagnosticsLogger, FitLogger, get_logger
from surfrig.core.tracing import trace_function
from surfrig.fit.energy import TERM_NAMES, EnergyBreakdown, combine_terms, parent_edge_lengths, total_energy
from surfrig.fit.parameters import DEFAULT_STEP_SIZES, ParameterLayout
from surfrig.geometry.mesh import validate_pair
from surfrig.models.fit import FitState, Scene
from surfrig.models.surfel import DeformedSurfel
from surfrig.render.rasterizer import render
from surfrig.rig.skinning import PoseRig
from surfrig.schemas.loss_log import LossRecord
from surfrig.schemas.run_config import EnergyConfig

logger = get_logger(__name__)
fit_logger = FitLogger(logger)
diagnostics = DiagnosticsLogger(logger)

MAX_STEP_SCALE = 64.0


class SceneEvaluator:
    """Energy of a scene averaged over its views; one PoseRig per view."""

    def __init__(self, scene: Scene, cfg: EnergyConfig):
        if not scene.views:
            raise InputError("a fit needs at least one view")
        self.cfg = cfg
        self.rigs: List[PoseRig] = []
        for view in scene.views:
            deformed = view.deformed if view.deformed is not None else scene.canonical
            validate_pair(scene.canonical, deformed)
            self.rigs.append(PoseRig(scene.canonical, deformed))
        self.edge_lengths = parent_edge_lengths(scene.canonical)

    def deform(self, scene: Scene, view: int) -> List[DeformedSurfel]:
        return self.rigs[view].deform(scene.surfels, scene.topology)

    def evaluate(self, scene: Scene) -> EnergyBreakdown:
        raw = {name: 0.0 for name in TERM_NAMES}
        for v, view in enumerate(scene.views):
            buffers = render(
                self.deform(scene, v),
                view.camera,
                background=scene.background,
                head=scene.head,
                specular_eye_only=scene.specular_eye_only,
            )
            breakdown = total_energy(buffers, view.target, scene.surfels, self.cfg, view.camera, self.edge_lengths)
            for name in TERM_NAMES:
                raw[name] += breakdown.raw[name]
        n = len(scene.views)
        return combine_terms({name: value / n for name, value in raw.items()}, self.cfg)


def _check_finite(breakdown: EnergyBreakdown, iteration: int) -> None:
    if not breakdown.is_finite():
        terms = dict(breakdown.raw, total=breakdown.total)
        diagnostics.log_divergence(iteration, terms)
        raise DivergedLoss(iteration, terms)


def finite_difference_gradient(
    loss: Callable[[np.ndarray], float],
    x: np.ndarray,
    h: float,
    pool: Optional[ThreadPoolExecutor] = None,
) -> np.ndarray:
    """Central differences (L(x + h·eₖ) − L(x − h·eₖ)) / 2h for every coordinate."""
    def partial(k: int) -> float:
        forward = x.copy()
        backward = x.copy()
        forward[k] += h
        backward[k] -= h
        return (loss(forward) - loss(backward)) / (2.0 * h)

    indices = range(x.size)
    values = list(pool.map(partial, indices)) if pool is not None else [partial(k) for k in indices]
    return np.asarray(values, dtype=np.float64)


@trace_function("surfrig.fit")
def fit(
    scene: Scene,
    cfg: EnergyConfig,
    groups: Sequence[str],
    iterations: int,
    step_sizes: Optional[Dict[str, float]] = None,
    fd_step: float = 1e-4,
    max_backtracks: int = 12,
    threads: int = 1,
    on_iteration: Optional[Callable[[LossRecord], None]] = None,
) -> FitState:
    """
    Minimize the mean total energy over the scene's views.

    Eye surfels' μ_c and R_c are left out of the parameter vector when
    ``cfg.freeze_eye`` is set. The returned loss never exceeds the initial one.

    Raises:
        DivergedLoss: a loss term became non-finite.
    """
    evaluator = SceneEvaluator(scene, cfg)
    layout = ParameterLayout(scene, groups, freeze_eye=cfg.freeze_eye)
    steps = {**DEFAULT_STEP_SIZES, **(step_sizes or {})}
    group_idx = layout.group_indices()

    current = evaluator.evaluate(scene)
    _check_finite(current, 0)
    state = FitState(
        iteration=0,
        loss=current.total,
        terms=dict(current.weighted),
        scene=scene,
        step_sizes={g: steps[g] for g in group_idx},
        initial_loss=current.total,
        initial_terms=dict(current.weighted),
        history=[current.total],
    )
    metrics.FIT_LOSS.set(current.total)
    if iterations <= 0 or layout.size == 0:
        return state

    def loss_at(x: np.ndarray) -> float:
        breakdown = evaluator.evaluate(layout.unpack(x))
        _check_finite(breakdown, state.iteration + 1)
        return breakdown.total

    x = layout.x0.copy()
    scale = 1.0
    pool = ThreadPoolExecutor(max_workers=threads) if threads > 1 else None
    try:
        for iteration in range(1, iterations + 1):
            grad = finite_difference_gradient(loss_at, x, fd_step, pool)
            direction = np.zeros_like(x)
            for group, idx in group_idx.items():
                norm = float(np.linalg.norm(grad[idx]))
                if norm > 0.0:
                    direction[idx] = -steps[group] * grad[idx] / norm

            accepted = False
            if direction.any():
                for _ in range(max_backtracks + 1):
                    x_try = x + scale * direction
                    candidate = layout.unpack(x_try)
                    breakdown = evaluator.evaluate(candidate)
                    _check_finite(breakdown, iteration)
                    if breakdown.total <= current.total:
                        x, current, accepted = x_try, breakdown, True
                        state.scene = candidate
                        state.accepted_steps += 1
                        break
                    scale *= 0.5
                if accepted:
                    scale = min(scale * 2.0, MAX_STEP_SCALE)

            state.iteration = iteration
            state.loss = current.total
            state.terms = dict(current.weighted)
            state.step_scale = scale
            state.step_sizes = {g: steps[g] * scale for g in group_idx}
            state.history.append(current.total)

            metrics.FIT_ITERATIONS.inc()
            metrics.FIT_LOSS.set(current.total)
            fit_logger.log_iteration(iteration, current.total, state.terms, state.step_sizes, accepted)
            if on_iteration is not None:
                on_iteration(LossRecord(
                    iteration=iteration,
                    loss=current.total,
                    terms=state.terms,
                    step_sizes=state.step_sizes,
                    accepted=accepted,
                ))
            if not accepted:
                logger.info(f"fit stopped at iteration {iteration}: no descent step found")
                break
    finally:
        if pool is not None:
            pool.shutdown()
    return state
