import math

import numpy as np
import pytest

from surfrig.appearance.sh import SH_C0
from surfrig.core.errors import SingularOrInverted
from surfrig.geometry.mat3 import (
    is_psd,
    matrix_to_quaternion,
    quaternion_to_matrix,
    rotation_exp,
    rotation_z,
)
from surfrig.geometry.mesh import build_adjacency, build_edge_matrix, build_ga_frame, mean_edge_length
from surfrig.models.surfel import BlendTopology, Surfel
from surfrig.rig.baseline import ga_deform_all, ga_deform_surfel
from surfrig.rig.binding import bind_lattice_surfels, bind_surfels
from surfrig.rig.skinning import (
    PoseRig,
    blend_weights,
    deform_normal,
    deform_surfel,
    jacobian,
    jbs,
    lerp_blend,
    rotate_view_dir,
)
from tests.conftest import square_strip, unit_triangle


def make_surfel(rng, parent=0):
    axis = rng.normal(size=3)
    return Surfel(
        parent=parent,
        mu_c=rng.normal(scale=0.2, size=3),
        R_c=rotation_exp(axis / np.linalg.norm(axis) * rng.uniform(0.0, 3.0)),
        scales=rng.uniform(0.05, 1.0, size=2),
        alpha=0.7,
        sh=np.full((3, 1), 0.5 / SH_C0),
    )


def slerp_from_identity(R, t):
    """Quaternion slerp between I and R at parameter t."""
    q = matrix_to_quaternion(R)
    angle = 2.0 * math.acos(min(1.0, q[0]))
    axis = q[1:] / np.linalg.norm(q[1:])
    half = 0.5 * t * angle
    return quaternion_to_matrix(np.concatenate([[math.cos(half)], math.sin(half) * axis]))


class TestBindSurfels:
    def test_single_surfel_on_unit_triangle(self):
        surfels = bind_surfels(unit_triangle(), 1, 0)
        assert len(surfels) == 1
        s = surfels[0]
        assert np.array_equal(s.mu_c, np.zeros(3))
        assert np.allclose(s.R_c, np.eye(3))
        ell = mean_edge_length(*unit_triangle().triangle(0))
        assert np.allclose(s.scales, [ell / 3.0, ell / 3.0])

    def test_counts_and_parents(self):
        surfels = bind_surfels(square_strip(), 3, 5)
        assert [s.parent for s in surfels] == [0, 0, 0, 1, 1, 1]

    def test_same_seed_is_bit_identical(self):
        a = bind_surfels(square_strip(), 4, 99)
        b = bind_surfels(square_strip(), 4, 99)
        for x, y in zip(a, b):
            assert np.array_equal(x.mu_c, y.mu_c)
            assert np.array_equal(x.R_c, y.R_c)
            assert np.array_equal(x.sh, y.sh)

    def test_samples_lie_inside_their_triangle(self):
        mesh = square_strip()
        frames = [build_ga_frame(*mesh.triangle(f)) for f in range(mesh.n_faces)]
        for s in bind_surfels(mesh, 16, 3):
            p = frames[s.parent].T_p + s.mu_c
            v0, v1, v2 = mesh.triangle(s.parent)
            a, b = np.linalg.lstsq(np.column_stack([v1 - v0, v2 - v0]), p - v0, rcond=None)[0]
            assert p[2] == pytest.approx(0.0)
            assert a >= -1e-12 and b >= -1e-12 and a + b <= 1.0 + 1e-12

    def test_eye_faces(self):
        surfels = bind_surfels(square_strip(), 3, 1, eye_faces=[1])
        assert [s.eye_flag for s in surfels] == [False, False, False, True, True, True]
        assert all(np.array_equal(s.mu_c, np.zeros(3)) for s in surfels if s.eye_flag)

    def test_eye_set_does_not_shift_the_random_stream(self):
        plain = bind_surfels(square_strip(), 3, 1)
        with_eyes = bind_surfels(square_strip(), 3, 1, eye_faces=[0])
        assert np.array_equal(plain[4].mu_c, with_eyes[4].mu_c)

    def test_base_color(self):
        s = bind_surfels(unit_triangle(), 1, 0, sh_degree=2, base_color=0.25)[0]
        assert s.sh.shape == (3, 9)
        assert np.allclose(s.sh[:, 0] * SH_C0, 0.25)
        assert np.array_equal(s.sh[:, 1:], np.zeros((3, 8)))


class TestBindLatticeSurfels:
    def test_counts_and_scales(self):
        surfels = bind_lattice_surfels(square_strip(), 4, scale_ratio=0.5)
        assert [s.parent for s in surfels] == [0] * 15 + [1] * 15
        assert np.allclose(surfels[0].scales, [0.125, 0.125])
        assert np.allclose(surfels[-1].scales, [0.5 * math.sqrt(2.0) / 4, 0.5 * math.sqrt(2.0) / 4])

    def test_lattice_points(self):
        mesh = square_strip()
        frame = build_ga_frame(*mesh.triangle(0))
        points = {tuple(np.round(frame.T_p + s.mu_c, 12)) for s in bind_lattice_surfels(mesh, 2) if s.parent == 0}
        expected = {(0.0, 0.0, 0.0), (0.5, 0.0, 0.0), (0.5, 0.5, 0.0), (1.0, 0.0, 0.0), (1.0, 0.5, 0.0), (1.0, 1.0, 0.0)}
        assert points == expected

    def test_rejects_zero_divisions(self):
        with pytest.raises(ValueError):
            bind_lattice_surfels(unit_triangle(), 0)


class TestJacobian:
    def test_rest_pose(self):
        E = build_edge_matrix([0, 0, 0], [1, 0, 0], [0.3, 1, 0])
        assert np.allclose(jacobian(E, E), np.eye(3), atol=1e-14)

    def test_uniform_scale(self):
        E = build_edge_matrix([0, 0, 0], [1, 0, 0], [0.3, 1, 0])
        assert np.allclose(jacobian(E, 2.0 * E), 2.0 * np.eye(3), atol=1e-14)

    @pytest.mark.property
    def test_residual(self, rng):
        for _ in range(200):
            E = rng.normal(size=(3, 3))
            E_def = rng.normal(size=(3, 3))
            if abs(np.linalg.det(E)) < 1e-2:
                continue
            J = jacobian(E, E_def)
            assert np.linalg.norm(J @ E - E_def) < 1e-9 * max(1.0, np.linalg.cond(E))


class TestBlendWeights:
    def test_uniform(self):
        assert np.allclose(blend_weights(np.zeros(4)), np.full(4, 0.25))

    def test_saturation(self):
        w = blend_weights([20.0, -20.0, -20.0])
        assert w[0] == pytest.approx(1.0, abs=1e-8)

    def test_normalized(self, rng):
        for _ in range(100):
            w = blend_weights(rng.normal(scale=5.0, size=int(rng.integers(1, 8))))
            assert abs(w.sum() - 1.0) < 1e-12
            assert np.all(w > 0.0)


class TestJbs:
    def test_degenerate_weights(self):
        J0 = np.array([[1.2, 0.3, 0.0], [-0.1, 0.9, 0.2], [0.0, 0.1, 1.1]])
        assert np.allclose(jbs([J0, rotation_z(1.0)], [1.0, 0.0]), J0, atol=1e-12)

    def test_geodesic_midpoint(self):
        assert np.allclose(jbs([np.eye(3), rotation_z(math.pi / 2)], [0.5, 0.5]), rotation_z(math.pi / 4), atol=1e-12)

    def test_stretch_averaging(self):
        blended = jbs([np.diag([2.0, 1.0, 1.0]), np.diag([1.0, 2.0, 1.0])], [0.5, 0.5])
        assert np.allclose(blended, np.diag([1.5, 1.5, 1.0]), atol=1e-12)

    def test_near_half_turn_keeps_unit_determinant(self):
        far = rotation_z(math.pi - 0.01)
        assert 0.999 <= np.linalg.det(jbs([np.eye(3), far], [0.5, 0.5])) <= 1.001
        assert np.linalg.det(lerp_blend([np.eye(3), far], [0.5, 0.5])) < 0.02

    def test_inverted_neighbor_is_reported(self):
        with pytest.raises(SingularOrInverted) as excinfo:
            jbs([np.eye(3), np.diag([1.0, 1.0, -1.0])], [0.5, 0.5])
        assert excinfo.value.neighbor == 1

    @pytest.mark.property
    def test_matches_slerp_oracle(self, rng):
        for _ in range(50):
            axis = rng.normal(size=3)
            R = rotation_exp(axis / np.linalg.norm(axis) * rng.uniform(0.1, math.pi - 0.1))
            t = rng.uniform()
            assert np.allclose(jbs([np.eye(3), R], [1.0 - t, t]), slerp_from_identity(R, t), atol=1e-10)


class TestLerpBlend:
    def test_degenerate_weights(self):
        J0 = np.diag([1.0, 2.0, 3.0])
        assert np.array_equal(lerp_blend([J0, np.eye(3)], [1.0, 0.0]), J0)

    def test_half_turn_collapse(self):
        blended = lerp_blend([np.eye(3), rotation_z(math.pi)], [0.5, 0.5])
        assert np.allclose(blended, np.diag([0.0, 0.0, 1.0]), atol=1e-15)
        assert np.linalg.det(blended) == pytest.approx(0.0, abs=1e-15)

    def test_weighted_sum(self, rng):
        Js = [rng.normal(size=(3, 3)) for _ in range(4)]
        w = blend_weights(rng.normal(size=4))
        assert np.allclose(lerp_blend(Js, w), sum(wi * J for wi, J in zip(w, Js)), atol=1e-14)


class TestDeformSurfel:
    def test_rest_pose(self, rng):
        s = make_surfel(rng)
        d = deform_surfel(s, np.eye(3), np.zeros(3))
        assert np.allclose(d.mu, s.mu_c)
        assert np.allclose(d.H, s.R_c @ s.S_c)
        assert np.allclose(d.n_d, s.normal)

    def test_similarity(self, rng):
        s = make_surfel(rng)
        d = deform_surfel(s, 2.0 * np.eye(3), [1.0, 0.0, 0.0])
        assert np.allclose(d.mu, 2.0 * s.mu_c + [1.0, 0.0, 0.0])
        assert np.allclose(d.H, 2.0 * s.R_c @ s.S_c)

    def test_shear(self, rng):
        s = make_surfel(rng)
        J = np.array([[1.0, 0.5, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
        d = deform_surfel(s, J, np.zeros(3))
        assert is_psd(d.covariance)
        t1, t2 = d.tangents
        assert abs(d.n_d @ t1) < 1e-12
        assert abs(d.n_d @ t2) < 1e-12

    def test_third_scale_column_follows_normal_direction(self, rng):
        s = make_surfel(rng)
        d = deform_surfel(s, np.eye(3), np.zeros(3))
        assert np.allclose(d.H[:, 2], s.R_c[:, 2])


class TestDeformNormal:
    def test_rotation(self, rng):
        for _ in range(20):
            axis = rng.normal(size=3)
            R = rotation_exp(axis / np.linalg.norm(axis) * rng.uniform(0.0, 3.0))
            n = rng.normal(size=3)
            n /= np.linalg.norm(n)
            assert np.linalg.norm(deform_normal(n, R) - R @ n) < 1e-12

    def test_diagonal_stretch(self):
        assert np.allclose(deform_normal([1.0, 0.0, 0.0], np.diag([2.0, 1.0, 1.0])), [1.0, 0.0, 0.0])

    @pytest.mark.property
    def test_orthogonal_to_deformed_tangents(self, rng):
        for _ in range(200):
            s = make_surfel(rng)
            J = rng.normal(size=(3, 3))
            if np.linalg.det(J) < 0.0:
                J[:, 0] = -J[:, 0]
            if np.linalg.cond(J) > 100.0:
                continue
            n_d = deform_normal(s.normal, J)
            assert abs(n_d @ (J @ s.R_c[:, 0])) < 1e-8
            assert abs(n_d @ (J @ s.R_c[:, 1])) < 1e-8


class TestGaBaseline:
    def test_identical_frames(self, rng):
        frame = build_ga_frame([0, 0, 0], [1, 0, 0], [0.2, 0.9, 0])
        s = make_surfel(rng)
        d = ga_deform_surfel(s, frame, frame)
        assert np.allclose(d.mu, s.mu_c + frame.T_p)
        assert np.allclose(d.H, s.R_c @ s.S_c)

    def test_rotation_matches_jacobian_path(self, rng):
        mesh = unit_triangle()
        R = rotation_z(math.pi / 2)
        moved = mesh.transformed(R)
        s = make_surfel(rng)
        canonical_frame = build_ga_frame(*mesh.triangle(0))
        deformed_frame = build_ga_frame(*moved.triangle(0))
        ga = ga_deform_surfel(s, canonical_frame, deformed_frame)
        jac = deform_surfel(s, R, deformed_frame.T_p)
        assert np.max(np.abs(ga.mu - jac.mu)) < 1e-10
        assert np.max(np.abs(ga.covariance - jac.covariance)) < 1e-10

    def test_stretch_is_lost(self):
        canonical, stretched = unit_triangle(), unit_triangle().transformed(np.diag([2.0, 1.0, 1.0]))
        surfels = bind_surfels(canonical, 1, 0)
        ga = ga_deform_all(surfels, canonical, stretched)[0]
        jac = PoseRig(canonical, stretched).deform(surfels)[0]
        ga_lengths = np.linalg.norm(ga.H[:, :2], axis=0)
        assert ga_lengths[0] == pytest.approx(ga_lengths[1])
        assert not np.allclose(jac.covariance, ga.covariance)


class TestRotateViewDir:
    def test_identity(self):
        assert np.array_equal(rotate_view_dir([0.0, 0.6, 0.8], np.eye(3)), [0.0, 0.6, 0.8])

    def test_quarter_turn(self):
        assert np.allclose(rotate_view_dir([1.0, 0.0, 0.0], rotation_z(math.pi / 2)), [0.0, -1.0, 0.0])


class TestPoseRig:
    def test_rest_pose_keeps_surfels(self):
        mesh = square_strip()
        surfels = bind_surfels(mesh, 4, 2)
        topology = BlendTopology.uniform(build_adjacency(mesh))
        deformed = PoseRig(mesh, mesh).deform(surfels, topology)
        frames = [build_ga_frame(*mesh.triangle(f)) for f in range(mesh.n_faces)]
        for s, d in zip(surfels, deformed):
            assert np.allclose(d.mu, s.mu_c + frames[s.parent].T_p, atol=1e-12)
            assert np.allclose(d.H, s.R_c @ s.S_c, atol=1e-12)

    def test_blended_rotations_are_proper(self):
        mesh = square_strip()
        bent = mesh.transformed(np.diag([1.5, 1.0, 1.0]))
        rig = PoseRig(mesh, bent)
        topology = BlendTopology.uniform(build_adjacency(mesh))
        for factors in rig.blended(topology):
            assert np.linalg.det(factors.U) == pytest.approx(1.0, abs=1e-12)
            assert is_psd(factors.P)

    def test_lerp_blended_on_uniform_scale(self):
        mesh = square_strip()
        rig = PoseRig(mesh, mesh.transformed(3.0 * np.eye(3)))
        for J in rig.lerp_blended(BlendTopology.uniform(build_adjacency(mesh))):
            assert np.allclose(J, 3.0 * np.eye(3), atol=1e-12)

    def test_dominant_self_logit_matches_unblended(self):
        mesh = square_strip()
        hinge = mesh.transformed(np.diag([1.0, 2.0, 1.0]))
        surfels = bind_surfels(mesh, 2, 4)
        rig = PoseRig(mesh, hinge)
        topology = BlendTopology(build_adjacency(mesh), [np.array([40.0, -40.0]), np.array([40.0, -40.0])])
        blended = rig.deform(surfels, topology)
        own = rig.deform(surfels)
        for a, b in zip(blended, own):
            assert np.allclose(a.mu, b.mu, atol=1e-9)
            assert np.allclose(a.H, b.H, atol=1e-9)
