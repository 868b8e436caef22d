"""
selftest: seeded property sweeps over every module.

Each suite counts individual checks; the command exits 1 when any check
fails. ``--mutate`` swaps a kernel for a deliberately broken variant so the
suites can be shown to catch it.
"""

import math
from contextlib import ExitStack
from typing import Callable, Dict, List, Optional
from unittest import mock

import numpy as np

from surfrig.appearance.asg import eval_asg, reflect, sample_lobes
from surfrig.appearance.sh import SH_C0
from surfrig.appearance.specular import eval_specular, init_specular_head, replace_lobe_params, specular_backward
from surfrig.commands.common import CommandContext, emit
from surfrig.commands.interp_demo import hinge_meshes, strip_comparison
from surfrig.core.logging import DiagnosticsLogger, get_logger
from surfrig.core.tracing import trace_function
from surfrig.fit.energy import combine_terms, depth_distortion, eye_opacity_loss, normal_consistency
from surfrig.fit.optimizer import fit
from surfrig.fit.ssim import photometric_loss
from surfrig.geometry import mat3
from surfrig.geometry.mat3 import (
    polar_decompose,
    polar_decompose_newton,
    quaternion_to_matrix,
    rotation_exp,
    rotation_z,
)
from surfrig.geometry.mesh import build_adjacency, build_ga_frame
from surfrig.models.fit import Scene, View
from surfrig.models.mesh import TriMesh
from surfrig.models.render import Camera, SplatHit
from surfrig.models.surfel import BlendTopology, DeformedSurfel, Surfel
from surfrig.render.camera import ray_directions
from surfrig.render.rasterizer import composite_pixel, render
from surfrig.rig.baseline import ga_deform_surfel
from surfrig.rig.binding import bind_surfels
from surfrig.rig.skinning import PoseRig, deform_normal, deform_surfel, jacobian, jbs, lerp_blend
from surfrig.schemas.errors import SelftestReport, SuiteResult
from surfrig.schemas.run_config import EnergyConfig, RunConfig

logger = get_logger(__name__)
diagnostics = DiagnosticsLogger(logger)

NAME = "selftest"
HELP = "run the seeded property suites"

SWEEP = 1000
SIMILARITY_SWEEP = 200
GEODESIC_SAMPLES = 50
GRADIENT_DRAWS = 20
MAX_FAILURES_REPORTED = 5


def _flip_inverse_transpose(original: Callable) -> Callable:
    def mutated(M, tol=mat3.DEFAULT_TOL):
        out = np.array(original(M, tol), copy=True)
        out[0, 1] = -out[0, 1]
        return out
    return mutated


MUTATIONS: Dict[str, Dict[str, Callable]] = {
    "inverse-transpose-sign": {
        "surfrig.rig.skinning.inverse_transpose": _flip_inverse_transpose(mat3.inverse_transpose),
    },
}


class Suite:
    def __init__(self, name: str):
        self.name = name
        self.passed = 0
        self.failures: List[str] = []

    def check(self, ok, label: str) -> None:
        if bool(ok):
            self.passed += 1
        else:
            self.failures.append(label)

    def result(self) -> SuiteResult:
        return SuiteResult(
            name=self.name,
            passed=self.passed,
            failed=len(self.failures),
            failures=self.failures[:MAX_FAILURES_REPORTED],
        )


def random_jacobian(rng: np.random.Generator, max_cond: float = 100.0) -> np.ndarray:
    """Random orientation-preserving 3x3 matrix with bounded condition number."""
    while True:
        M = rng.normal(size=(3, 3))
        if np.linalg.det(M) < 0.0:
            M[:, 0] = -M[:, 0]
        if np.linalg.cond(M) <= max_cond:
            return M


def random_rotation(rng: np.random.Generator) -> np.ndarray:
    return quaternion_to_matrix(rng.normal(size=4))


def random_surfel(rng: np.random.Generator, parent: int = 0) -> Surfel:
    return Surfel(
        parent=parent,
        mu_c=rng.normal(scale=0.2, size=3),
        R_c=random_rotation(rng),
        scales=rng.uniform(0.05, 1.0, size=2),
        alpha=float(rng.uniform(0.1, 1.0)),
        sh=np.full((3, 1), 0.5 / SH_C0),
    )


def suite_polar(rng: np.random.Generator) -> Suite:
    suite = Suite("polar")
    for k in range(SWEEP):
        M = random_jacobian(rng)
        f = polar_decompose(M)
        U, P = f.U, f.P
        W, sigma, Vt = np.linalg.svd(M)
        U_ref = W @ Vt
        P_ref = Vt.T @ np.diag(sigma) @ Vt
        newton = polar_decompose_newton(M)
        scale = np.linalg.norm(M)
        suite.check(
            np.max(np.abs(U.T @ U - np.eye(3))) < 1e-9
            and np.max(np.abs(P - P.T)) <= 1e-12 * scale
            and np.min(np.linalg.eigvalsh(P)) >= -1e-12 * scale
            and np.linalg.norm(U @ P - M) / scale < 1e-8
            and np.max(np.abs(U - U_ref)) < 1e-8
            and np.max(np.abs(P - P_ref)) / scale < 1e-8
            and np.max(np.abs(newton.U - U)) < 1e-8,
            f"polar factors of sample {k}",
        )
    return suite


def suite_covariance(rng: np.random.Generator) -> Suite:
    suite = Suite("covariance-psd")
    for k in range(SWEEP):
        s = random_surfel(rng)
        d = deform_surfel(s, random_jacobian(rng), np.zeros(3))
        suite.check(np.min(np.linalg.eigvalsh(d.covariance)) >= -1e-10, f"covariance of sample {k}")
    return suite


def suite_orthogonality(rng: np.random.Generator) -> Suite:
    suite = Suite("orthogonality")
    for k in range(SWEEP):
        s = random_surfel(rng)
        J = random_jacobian(rng)
        n_d = deform_normal(s.normal, J)
        t1, t2 = J @ s.R_c[:, 0], J @ s.R_c[:, 1]
        suite.check(abs(n_d @ t1) < 1e-8 and abs(n_d @ t2) < 1e-8, f"normal rule sample {k}")
    for k in range(SWEEP):
        s = random_surfel(rng)
        axis = rng.normal(size=3)
        R = rotation_exp(axis / np.linalg.norm(axis) * rng.uniform(0.0, math.pi - 0.1))
        suite.check(np.linalg.norm(deform_normal(s.normal, R) - R @ s.normal) < 1e-12, f"rotation sample {k}")
    return suite


def suite_similarity(rng: np.random.Generator) -> Suite:
    suite = Suite("similarity-parity")
    for k in range(SIMILARITY_SWEEP):
        while True:
            tri = rng.normal(size=(3, 3))
            if 0.5 * np.linalg.norm(np.cross(tri[1] - tri[0], tri[2] - tri[0])) > 0.05:
                break
        scale = rng.uniform(0.5, 2.0)
        R = random_rotation(rng)
        offset = rng.normal(size=3)
        moved = tri @ (scale * R).T + offset
        frame_c = build_ga_frame(*tri)
        frame_d = build_ga_frame(*moved)
        s = random_surfel(rng)
        J = jacobian(frame_c.E, frame_d.E)
        jac = deform_surfel(s, J, frame_d.T_p)
        ga = ga_deform_surfel(s, frame_c, frame_d)
        cov_scale = np.linalg.norm(ga.covariance)
        suite.check(
            np.max(np.abs(jac.mu - ga.mu)) < 1e-8
            and np.max(np.abs(jac.covariance - ga.covariance)) / cov_scale < 1e-8,
            f"similarity sample {k}",
        )
    return suite


def suite_geodesic(rng: np.random.Generator) -> Suite:
    suite = Suite("jbs-geodesic")
    I = np.eye(3)
    for k in range(GEODESIC_SAMPLES):
        theta = rng.uniform(-math.pi + 0.1, math.pi - 0.1)
        t = rng.uniform(0.0, 1.0)
        blended = jbs([I, rotation_z(theta)], [1.0 - t, t])
        suite.check(np.max(np.abs(blended - rotation_z(t * theta))) < 1e-8, f"geodesic sample {k}")
    far = rotation_z(math.pi - 0.01)
    suite.check(np.linalg.det(lerp_blend([I, far], [0.5, 0.5])) < 0.02, "lerp midpoint determinant")
    suite.check(0.999 <= np.linalg.det(jbs([I, far], [0.5, 0.5])) <= 1.001, "jbs midpoint determinant")
    return suite


def _random_unit(rng: np.random.Generator) -> np.ndarray:
    v = rng.normal(size=3)
    return v / np.linalg.norm(v)


def suite_asg(rng: np.random.Generator) -> Suite:
    suite = Suite("asg-specular")
    lobes = sample_lobes((4, 4), sharpness=8.0, amplitude=0.7)
    directions = rng.normal(size=(SWEEP, 3))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    for i, lobe in enumerate(lobes):
        suite.check(abs(eval_asg(lobe, lobe.z) - lobe.xi) < 1e-12, f"peak of lobe {i}")
        back = [eval_asg(lobe, nu) for nu in directions if nu @ lobe.z < 0.0]
        suite.check(all(v == 0.0 for v in back), f"back hemisphere of lobe {i}")

    h = 1e-5
    draws = 0
    seed = 0
    while draws < GRADIENT_DRAWS:
        seed += 1
        head = init_specular_head(seed, grid=(2, 2), pe_freqs=2, hidden=(8, 8))
        head = head.with_params(b3=np.array([1.0]))
        d_rot = _random_unit(rng)
        n = _random_unit(rng)
        if n @ d_rot < 0.0:
            n = -n
        omega = reflect(d_rot, n)
        value, grads = specular_backward(head, omega, d_rot, n)
        if value < 1e-3:
            continue
        draws += 1
        for name in ("W1", "b1", "W2", "b2", "W3", "b3"):
            param = getattr(head, name)
            idx = tuple(int(rng.integers(0, dim)) for dim in param.shape)
            plus, minus = param.copy(), param.copy()
            plus[idx] += h
            minus[idx] -= h
            numeric = (
                eval_specular(head.with_params(**{name: plus}), omega, d_rot, n)
                - eval_specular(head.with_params(**{name: minus}), omega, d_rot, n)
            ) / (2.0 * h)
            analytic = grads[name][idx]
            suite.check(abs(analytic - numeric) <= 1e-4 * max(abs(analytic), abs(numeric)) + 1e-8,
                        f"gradient {name} draw {draws}")
        for name in ("xi", "lam", "mu"):
            base = np.array([getattr(lobe, name) for lobe in head.lobes])
            i = int(rng.integers(0, len(head.lobes)))
            plus, minus = base.copy(), base.copy()
            plus[i] += h
            minus[i] -= h
            numeric = (
                eval_specular(replace_lobe_params(head, **{name: plus}), omega, d_rot, n)
                - eval_specular(replace_lobe_params(head, **{name: minus}), omega, d_rot, n)
            ) / (2.0 * h)
            analytic = grads[name][i]
            suite.check(abs(analytic - numeric) <= 1e-4 * max(abs(analytic), abs(numeric)) + 1e-8,
                        f"gradient {name} draw {draws}")
    return suite


def _flat_surfel(mu, normal_tilt: float = 0.0, scale: float = 0.5, alpha: float = 1.0, gray: float = 0.5):
    R = rotation_exp([normal_tilt, 0.0, 0.0])
    H = R @ np.diag([scale, scale, 1.0])
    return DeformedSurfel(
        mu=np.asarray(mu, dtype=np.float64),
        H=H,
        n_d=R[:, 2],
        alpha=alpha,
        sh=np.full((3, 1), gray / SH_C0),
        U_b=np.eye(3),
    )


def _front_camera(size: int = 16) -> Camera:
    return Camera(position=[0.0, 0.0, 3.0], look_at=[0.0, 0.0, 0.0], up=[0.0, 1.0, 0.0],
                  fov_y=40.0, width=size, height=size)


def suite_rasterizer(rng: np.random.Generator) -> Suite:
    suite = Suite("rasterizer")
    camera = _front_camera()
    dirs = ray_directions(camera)

    tilted = _flat_surfel([0.1, -0.05, 0.0], normal_tilt=0.4, scale=0.8)
    buffers = render([tilted], camera)
    covered = buffers.covered
    t_ref = ((tilted.mu - camera.position) @ tilted.n_d) / (dirs @ tilted.n_d)
    suite.check(covered.any(), "single surfel covers pixels")
    suite.check(np.max(np.abs(buffers.depth[covered] - t_ref[covered])) < 1e-6, "single surfel depth")

    surfels = [_flat_surfel(rng.normal(scale=0.3, size=3), rng.uniform(-0.5, 0.5), rng.uniform(0.2, 0.6),
                            rng.uniform(0.3, 1.0), rng.uniform(0.1, 0.9)) for _ in range(6)]
    many = render(surfels, camera, background=(0.2, 0.3, 0.4))
    suite.check(many.closure_residual() < 1e-4, "weight closure")

    threaded = render(surfels, camera, background=(0.2, 0.3, 0.4), threads=4)
    suite.check(
        np.array_equal(many.color, threaded.color)
        and np.array_equal(many.depth, threaded.depth)
        and np.array_equal(many.normal, threaded.normal)
        and np.array_equal(many.transmittance, threaded.transmittance),
        "thread count invariance",
    )

    hits = [SplatHit(index=i, u=0.0, v=0.0, t=t, G=1.0, alpha_eff=a)
            for i, (t, a) in enumerate([(2.5, 0.3), (1.5, 0.6), (3.5, 0.5)])]
    colors = rng.uniform(0.0, 1.0, size=(3, 3))
    background = np.array([0.1, 0.2, 0.3])
    record = composite_pixel(hits, [tilted] * 3, np.array([0.0, 0.0, -1.0]), background, colors=colors)
    a1, a0, a2 = 0.6, 0.3, 0.5
    expected = (colors[1] * a1 + colors[0] * a0 * (1 - a1) + colors[2] * a2 * (1 - a1) * (1 - a0)
                + background * (1 - a1) * (1 - a0) * (1 - a2))
    suite.check(np.max(np.abs(record.color - expected)) < 1e-12, "closed-form compositing")
    return suite


def suite_energy(rng: np.random.Generator) -> Suite:
    suite = Suite("energy")
    image = rng.uniform(size=(12, 12, 3))
    suite.check(photometric_loss(image, image) == 0.0, "photometric on identical images")
    weights = np.zeros((1, 4, 4))
    weights[0] = 0.7
    suite.check(depth_distortion(weights, np.ones((1, 4, 4))) == 0.0, "depth distortion with single hits")
    camera = _front_camera(24)
    plane = render([_flat_surfel([0.0, 0.0, 0.0], scale=3.0)], camera)
    suite.check(normal_consistency(plane, camera) < 1e-6, "normal consistency on a fronto-parallel plane")
    eyes = [Surfel(0, np.zeros(3), np.eye(3), np.ones(2), 1.0, np.zeros((3, 1)), eye_flag=True)]
    suite.check(eye_opacity_loss(eyes) == 0.0, "eye opacity at alpha 1")
    unit = {"photometric": 1.0, "depth": 1.0, "normal": 1.0, "eye": 1.0, "position": 0.0, "scaling": 0.0}
    suite.check(abs(combine_terms(unit, EnergyConfig()).total - 101.15) < 1e-12, "default energy balance")
    return suite


def suite_coverage(rng: np.random.Generator) -> Suite:
    suite = Suite("coverage")
    result = strip_comparison()
    suite.check(result["gap_ga"] > 0, "GA baseline leaves the stretched hinge under-covered")
    suite.check(result["gap_jacobian"] < result["gap_ga"], "jacobian coverage gap below GA baseline")
    return suite


def gray_patch_scene(true_gray: float = 0.8, start_gray: float = 0.5, eye: bool = False) -> Scene:
    """One surfel in front of a camera; the target is the same surfel rendered in ``true_gray``."""
    mesh = TriMesh([[-1.0, -0.8, 0.0], [1.0, -0.8, 0.0], [0.0, 1.0, 0.0]], [[0, 1, 2]])
    surfels = bind_surfels(mesh, 1, 0, sh_degree=0, base_color=start_gray, eye_faces=[0] if eye else None)
    camera = _front_camera(16)
    rig = PoseRig(mesh, mesh)
    target_surfels = [Surfel(s.parent, s.mu_c, s.R_c, s.scales, s.alpha, np.full((3, 1), true_gray / SH_C0))
                      for s in surfels]
    target = render(rig.deform(target_surfels), camera).color
    return Scene(
        canonical=mesh,
        surfels=surfels,
        topology=BlendTopology.uniform(build_adjacency(mesh)),
        views=[View(camera=camera, target=target)],
    )


def hinge_seam_scene(bend_degrees: float = 60.0, target_logits=(3.0, -3.0)) -> Scene:
    """
    Two-face hinge folded by ``bend_degrees``; the target is rendered with
    ``target_logits`` on every face and the scene starts from uniform weights.
    """
    canonical, deformed = hinge_meshes(stretch=1.0, bend_degrees=bend_degrees)
    surfels = bind_surfels(canonical, 3, 0, sh_degree=0, base_color=0.7)
    uniform = BlendTopology.uniform(build_adjacency(canonical))
    sharp = BlendTopology(uniform.adjacency, [np.array(target_logits, dtype=np.float64) for _ in uniform.logits])
    camera = Camera(position=[0.5, 0.5, 3.0], look_at=[0.5, 0.5, 0.0], up=[0.0, 1.0, 0.0],
                    fov_y=40.0, width=16, height=16)
    target = render(PoseRig(canonical, deformed).deform(surfels, sharp), camera).color
    return Scene(
        canonical=canonical,
        surfels=surfels,
        topology=uniform,
        views=[View(camera=camera, target=target, deformed=deformed)],
    )


PHOTOMETRIC_ONLY = EnergyConfig(
    lambda_depth=0.0, lambda_normal=0.0, lambda_eye=0.0, weight_position=0.0, weight_scaling=0.0
)


def suite_fit(rng: np.random.Generator) -> Suite:
    suite = Suite("fit")
    state = fit(gray_patch_scene(), PHOTOMETRIC_ONLY, groups=["color"], iterations=200)
    color = SH_C0 * state.scene.surfels[0].sh[:, 0]
    suite.check(state.loss <= 0.01 * state.initial_loss, "gray patch loss reduction")
    suite.check(np.max(np.abs(color - 0.8)) < 0.01, "gray patch color recovery")
    suite.check(all(b <= a for a, b in zip(state.history, state.history[1:])), "monotone loss")

    eye_scene = gray_patch_scene(eye=True)
    frozen = fit(eye_scene, PHOTOMETRIC_ONLY, groups=["color", "position", "rotation"], iterations=3)
    before, after = eye_scene.surfels[0], frozen.scene.surfels[0]
    suite.check(np.array_equal(before.mu_c, after.mu_c) and np.array_equal(before.R_c, after.R_c), "eye freeze")

    seam = fit(hinge_seam_scene(), PHOTOMETRIC_ONLY, groups=["blend"], iterations=30)
    suite.check(seam.loss < 0.1 * seam.initial_loss, "hinge-seam blend fit below the uniform-weight loss")
    return suite


SUITES = (
    suite_polar,
    suite_covariance,
    suite_orthogonality,
    suite_similarity,
    suite_geodesic,
    suite_asg,
    suite_rasterizer,
    suite_energy,
    suite_coverage,
    suite_fit,
)


def run_suites(seed: int, mutate: Optional[str] = None) -> SelftestReport:
    if mutate is not None and mutate not in MUTATIONS:
        raise ValueError(f"unknown mutation {mutate!r}")
    results = []
    with ExitStack() as stack:
        for target, replacement in MUTATIONS.get(mutate, {}).items():
            stack.enter_context(mock.patch(target, replacement))
        for index, build in enumerate(SUITES):
            rng = np.random.default_rng([seed, index])
            try:
                result = build(rng).result()
            except Exception as exc:
                result = SuiteResult(name=build.__name__.replace("suite_", ""), passed=0, failed=1,
                                     failures=[f"{type(exc).__name__}: {exc}"])
            diagnostics.log_suite(result.name, result.passed, result.failed)
            results.append(result)
    return SelftestReport(suites=results, passed=all(r.failed == 0 for r in results))


@trace_function("surfrig.command.selftest")
def run(config: Optional[RunConfig], ctx: CommandContext) -> int:
    report = run_suites(ctx.seed, ctx.mutate)
    emit(ctx, report)
    return 0 if report.passed else 1
