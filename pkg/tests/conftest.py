import math

import numpy as np
import pytest

from surfrig.models.mesh import TriMesh
from surfrig.models.render import Camera

GOLDEN = (1.0 + math.sqrt(5.0)) / 2.0


def unit_triangle() -> TriMesh:
    return TriMesh([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]], [[0, 1, 2]])


def square_strip() -> TriMesh:
    return TriMesh(
        [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [1.0, 1.0, 0.0], [0.0, 1.0, 0.0]],
        [[0, 1, 2], [0, 2, 3]],
    )


def icosahedron() -> TriMesh:
    t = GOLDEN
    vertices = [
        [-1, t, 0], [1, t, 0], [-1, -t, 0], [1, -t, 0],
        [0, -1, t], [0, 1, t], [0, -1, -t], [0, 1, -t],
        [t, 0, -1], [t, 0, 1], [-t, 0, -1], [-t, 0, 1],
    ]
    faces = [
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ]
    return TriMesh(vertices, faces)


def front_camera(size: int = 16, distance: float = 3.0) -> Camera:
    return Camera(
        position=[0.0, 0.0, distance],
        look_at=[0.0, 0.0, 0.0],
        up=[0.0, 1.0, 0.0],
        fov_y=40.0,
        width=size,
        height=size,
    )


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
