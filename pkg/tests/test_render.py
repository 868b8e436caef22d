import math

import numpy as np
import pytest

from surfrig.appearance.color import total_color
from surfrig.appearance.sh import SH_C0
from surfrig.appearance.specular import init_specular_head
from surfrig.core.errors import InvalidCamera
from surfrig.models.render import Camera, SplatHit
from surfrig.models.surfel import DeformedSurfel
from surfrig.render.camera import backproject, ray_directions, validate_camera
from surfrig.render.rasterizer import composite_pixel, ray_splat_intersect, render, surfel_colors
from tests.conftest import front_camera


def disk(mu=(0.0, 0.0, 0.0), scale=1.0, alpha=1.0, color=(1.0, 1.0, 1.0), H=None, normal=(0.0, 0.0, 1.0)):
    if H is None:
        H = np.diag([scale, scale, 0.0])
    H = np.asarray(H, dtype=np.float64)
    n = np.cross(H[:, 0], H[:, 1])
    n = n / np.linalg.norm(n) if np.linalg.norm(n) > 0 else np.asarray(normal, dtype=np.float64)
    return DeformedSurfel(
        mu=np.asarray(mu, dtype=np.float64),
        H=H,
        n_d=n,
        alpha=alpha,
        sh=np.asarray(color, dtype=np.float64).reshape(3, 1) / SH_C0,
        U_b=np.eye(3),
    )


def random_scene(rng, count=6):
    surfels = []
    for _ in range(count):
        H = np.zeros((3, 3))
        H[:, 0] = [rng.uniform(0.2, 0.5), rng.normal(scale=0.05), rng.normal(scale=0.1)]
        H[:, 1] = [rng.normal(scale=0.05), rng.uniform(0.2, 0.5), rng.normal(scale=0.1)]
        surfels.append(
            disk(
                mu=rng.uniform(-0.4, 0.4, size=3),
                alpha=rng.uniform(0.3, 0.9),
                color=rng.uniform(0.1, 0.9, size=3),
                H=H,
            )
        )
    return surfels


class TestRaySplatIntersect:
    def test_head_on(self):
        hit = ray_splat_intersect([0.0, 0.0, 5.0], [0.0, 0.0, -1.0], disk(alpha=0.8), index=3)
        assert hit.t == pytest.approx(5.0)
        assert hit.u == pytest.approx(0.0) and hit.v == pytest.approx(0.0)
        assert hit.G == pytest.approx(1.0)
        assert hit.alpha_eff == pytest.approx(0.8)
        assert hit.index == 3

    def test_parallel_ray_misses(self):
        assert ray_splat_intersect([0.0, 0.0, 0.5], [1.0, 0.0, 0.0], disk()) is None

    def test_plane_behind_origin(self):
        assert ray_splat_intersect([0.0, 0.0, 5.0], [0.0, 0.0, 1.0], disk()) is None

    def test_outside_cutoff(self):
        assert ray_splat_intersect([3.5, 0.0, 5.0], [0.0, 0.0, -1.0], disk()) is None
        assert ray_splat_intersect([2.9, 0.0, 5.0], [0.0, 0.0, -1.0], disk()) is not None

    def test_oblique_matches_linear_solve(self, rng):
        for _ in range(20):
            H = rng.normal(size=(3, 3))
            ds = disk(mu=rng.normal(size=3), H=H)
            h1, h2 = H[:, 0], H[:, 1]
            target = ds.mu + rng.uniform(-1.0, 1.0) * h1 + rng.uniform(-1.0, 1.0) * h2
            origin = target + rng.uniform(1.0, 4.0) * rng.normal(size=3)
            direction = (target - origin) / np.linalg.norm(target - origin)
            system = np.column_stack([direction, -h1, -h2])
            if np.linalg.cond(system) > 1e3:
                continue
            hit = ray_splat_intersect(origin, direction, ds, cutoff=10.0)
            if hit is None:
                continue
            t, u, v = np.linalg.solve(system, ds.mu - origin)
            assert hit.t == pytest.approx(t, rel=1e-9)
            assert hit.u == pytest.approx(u, abs=1e-9)
            assert hit.v == pytest.approx(v, abs=1e-9)
            assert hit.G == pytest.approx(math.exp(-0.5 * (u * u + v * v)), rel=1e-9)


class TestCompositePixel:
    WHITE = np.ones((1, 3))

    def test_single_hit(self):
        surfels = [disk(alpha=0.8)]
        hit = SplatHit(index=0, u=0.0, v=0.0, t=2.0, G=1.0, alpha_eff=0.8)
        record = composite_pixel([hit], surfels, [0.0, 0.0, -1.0], [0.0, 0.0, 0.0], colors=self.WHITE)
        assert np.allclose(record.color, 0.8)
        assert record.transmittance == pytest.approx(0.2)
        assert record.depth == pytest.approx(2.0)
        assert np.allclose(record.normal, [0.0, 0.0, 1.0])

    def test_two_layers_in_depth_order(self):
        surfels = [disk(alpha=0.5), disk(alpha=0.5)]
        colors = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
        near = SplatHit(index=0, u=0.0, v=0.0, t=1.0, G=1.0, alpha_eff=0.5)
        far = SplatHit(index=1, u=0.0, v=0.0, t=2.0, G=1.0, alpha_eff=0.5)
        record = composite_pixel([far, near], surfels, [0.0, 0.0, -1.0], [0.0, 0.0, 0.0], colors=colors)
        assert np.allclose(record.color, [0.5, 0.25, 0.0])
        assert record.transmittance == pytest.approx(0.25)
        assert record.indices == [0, 1]
        assert record.weights == pytest.approx([0.5, 0.25])

    def test_three_hits_against_direct_sum(self, rng):
        surfels = [disk() for _ in range(3)]
        colors = rng.uniform(size=(3, 3))
        alphas = [0.3, 0.6, 0.45]
        hits = [SplatHit(index=i, u=0.0, v=0.0, t=1.0 + i, G=1.0, alpha_eff=a) for i, a in enumerate(alphas)]
        background = np.array([0.2, 0.4, 0.6])
        record = composite_pixel(hits[::-1], surfels, [0.0, 0.0, -1.0], background, colors=colors)
        expected = colors[0] * 0.3 + colors[1] * 0.6 * 0.7 + colors[2] * 0.45 * 0.7 * 0.4
        T = 0.7 * 0.4 * 0.55
        assert np.allclose(record.color, expected + T * background)
        assert record.transmittance == pytest.approx(T)
        assert sum(record.weights) + record.transmittance == pytest.approx(1.0)

    def test_no_hits(self):
        record = composite_pixel([], [], [0.0, 0.0, -1.0], [0.1, 0.2, 0.3], far=50.0)
        assert np.allclose(record.color, [0.1, 0.2, 0.3])
        assert record.depth == 50.0
        assert record.transmittance == 1.0
        assert np.array_equal(record.normal, np.zeros(3))

    def test_normal_faces_the_camera(self):
        surfels = [disk(H=np.diag([1.0, -1.0, 0.0]))]
        hit = SplatHit(index=0, u=0.0, v=0.0, t=2.0, G=1.0, alpha_eff=0.5)
        record = composite_pixel([hit], surfels, [0.0, 0.0, -1.0], [0.0, 0.0, 0.0], colors=self.WHITE)
        assert np.allclose(record.normal, [0.0, 0.0, 1.0])

    def test_specular_head_shades_hits(self):
        head = init_specular_head(3, grid=(2, 2), pe_freqs=2, hidden=(8, 8)).with_params(b3=np.array([5.0]))
        surfels = [disk(alpha=0.8, color=(0.2, 0.3, 0.4))]
        hit = SplatHit(index=0, u=0.0, v=0.0, t=2.0, G=1.0, alpha_eff=0.8)
        view_dir = np.array([0.0, 0.0, -1.0])
        diffuse = composite_pixel([hit], surfels, view_dir, [0.0, 0.0, 0.0])
        shaded = composite_pixel([hit], surfels, view_dir, [0.0, 0.0, 0.0], head=head)
        expected = np.clip(total_color(surfels[0].sh, head, view_dir, np.eye(3), surfels[0].n_d), 0.0, 1.0)
        assert np.allclose(diffuse.color, 0.8 * np.array([0.2, 0.3, 0.4]))
        assert np.allclose(shaded.color, 0.8 * expected)
        assert np.all(shaded.color > diffuse.color)

        eye_only = composite_pixel([hit], surfels, view_dir, [0.0, 0.0, 0.0], head=head, specular_eye_only=True)
        assert np.allclose(eye_only.color, diffuse.color)


class TestCamera:
    def test_center_ray_looks_forward(self):
        dirs = ray_directions(front_camera(size=15))
        assert dirs.shape == (15, 15, 3)
        assert np.allclose(dirs[7, 7], [0.0, 0.0, -1.0])
        assert np.allclose(np.linalg.norm(dirs, axis=-1), 1.0)
        assert dirs[0, 7, 1] > 0.0

    def test_backproject_center(self):
        camera = front_camera(size=15)
        points = backproject(camera, np.full((15, 15), 3.0))
        assert np.allclose(points[7, 7], [0.0, 0.0, 0.0])

    @pytest.mark.parametrize(
        "overrides",
        [
            {"fov_y": 0.0},
            {"fov_y": 180.0},
            {"width": 0},
            {"near": 5.0, "far": 1.0},
            {"up": [0.0, 0.0, 1.0]},
            {"look_at": [0.0, 0.0, 3.0]},
        ],
    )
    def test_invalid_cameras(self, overrides):
        params = dict(position=[0.0, 0.0, 3.0], look_at=[0.0, 0.0, 0.0], up=[0.0, 1.0, 0.0], fov_y=40.0, width=8, height=8)
        params.update(overrides)
        with pytest.raises(InvalidCamera):
            validate_camera(Camera(**params))


class TestRender:
    def test_empty_scene(self):
        camera = front_camera(size=8)
        buffers = render([], camera, background=(0.1, 0.2, 0.3))
        assert np.allclose(buffers.color, np.broadcast_to([0.1, 0.2, 0.3], (8, 8, 3)))
        assert np.all(buffers.depth == camera.far)
        assert np.all(buffers.transmittance == 1.0)
        assert np.array_equal(buffers.normal, np.zeros((8, 8, 3)))
        assert not buffers.covered.any()

    def test_fronto_parallel_center_pixel(self):
        surfel = disk(scale=2.0, alpha=0.9, color=(0.6, 0.4, 0.2))
        buffers = render([surfel], front_camera(size=15), background=(1.0, 1.0, 1.0))
        assert buffers.depth[7, 7] == pytest.approx(3.0)
        assert np.allclose(buffers.color[7, 7], 0.9 * np.array([0.6, 0.4, 0.2]) + 0.1)
        assert np.allclose(buffers.normal[7, 7], [0.0, 0.0, 1.0])
        assert buffers.transmittance[7, 7] == pytest.approx(0.1)

    def test_fronto_parallel_normal_map_is_constant(self):
        facing = disk(scale=0.6)
        buffers = render([facing], front_camera(size=15))
        assert buffers.covered.sum() > 1
        assert np.allclose(buffers.normal[buffers.covered], facing.n_d)

        away = disk(H=np.diag([0.6, -0.6, 0.0]))
        assert np.allclose(away.n_d, [0.0, 0.0, -1.0])
        flipped = render([away], front_camera(size=15))
        assert np.allclose(flipped.normal[flipped.covered], -away.n_d)

    def test_thread_count_does_not_change_output(self, rng):
        surfels = random_scene(rng)
        camera = front_camera(size=12)
        a = render(surfels, camera, background=(0.2, 0.2, 0.2), threads=1)
        b = render(surfels, camera, background=(0.2, 0.2, 0.2), threads=4)
        for name in ("color", "depth", "normal", "transmittance", "hit_weights", "hit_index"):
            assert np.array_equal(getattr(a, name), getattr(b, name))

    def test_matches_per_pixel_compositing(self, rng):
        surfels = random_scene(rng)
        camera = front_camera(size=10)
        background = np.array([0.3, 0.1, 0.5])
        buffers = render(surfels, camera, background=background)
        colors = surfel_colors(surfels, camera.position)
        dirs = ray_directions(camera)
        for row, col in [(0, 0), (5, 5), (4, 6), (9, 2)]:
            hits = [ray_splat_intersect(camera.position, dirs[row, col], s, index=i) for i, s in enumerate(surfels)]
            record = composite_pixel(
                [h for h in hits if h is not None], surfels, dirs[row, col], background, colors=colors, far=camera.far
            )
            assert np.allclose(buffers.color[row, col], record.color, atol=1e-12)
            assert buffers.depth[row, col] == pytest.approx(record.depth, abs=1e-12)
            assert buffers.transmittance[row, col] == pytest.approx(record.transmittance, abs=1e-12)

    def test_weights_and_transmittance_close(self, rng):
        buffers = render(random_scene(rng, count=10), front_camera(size=12))
        assert buffers.closure_residual() < 1e-12
        assert buffers.covered.any()

    def test_invalid_camera(self):
        camera = Camera(position=[0.0, 0.0, 3.0], look_at=[0.0, 0.0, 0.0], up=[0.0, 0.0, 1.0], fov_y=40.0, width=4, height=4)
        with pytest.raises(InvalidCamera):
            render([disk()], camera)
