import math

import numpy as np

from surfrig.core.errors import InvalidCamera
from surfrig.models.render import Camera


def validate_camera(camera: Camera) -> None:
    if not 0.0 < camera.fov_y < 180.0:
        raise InvalidCamera(f"fov_y must be in (0, 180), got {camera.fov_y}")
    if camera.width < 1 or camera.height < 1:
        raise InvalidCamera(f"image size must be positive, got {camera.width}x{camera.height}")
    if not 0.0 <= camera.near < camera.far:
        raise InvalidCamera(f"need 0 <= near < far, got near={camera.near}, far={camera.far}")
    forward = camera.look_at - camera.position
    norm = np.linalg.norm(forward)
    if norm == 0.0:
        raise InvalidCamera("camera position coincides with look_at")
    up_norm = np.linalg.norm(camera.up)
    if up_norm == 0.0 or np.linalg.norm(np.cross(forward / norm, camera.up / up_norm)) < 1e-9:
        raise InvalidCamera("up vector is parallel to the view direction")


def camera_basis(camera: Camera):
    """(forward, right, up) orthonormal vectors of the camera."""
    validate_camera(camera)
    forward = camera.look_at - camera.position
    forward = forward / np.linalg.norm(forward)
    right = np.cross(forward, camera.up)
    right = right / np.linalg.norm(right)
    up = np.cross(right, forward)
    return forward, right, up


def ray_directions(camera: Camera) -> np.ndarray:
    """Unit ray directions through pixel centers, shape (H, W, 3), row 0 at the top."""
    forward, right, up = camera_basis(camera)
    tan_half = math.tan(math.radians(camera.fov_y) * 0.5)
    aspect = camera.width / camera.height
    xs = ((np.arange(camera.width) + 0.5) / camera.width * 2.0 - 1.0) * tan_half * aspect
    ys = (1.0 - (np.arange(camera.height) + 0.5) / camera.height * 2.0) * tan_half
    dirs = forward[None, None, :] + xs[None, :, None] * right[None, None, :] + ys[:, None, None] * up[None, None, :]
    return dirs / np.linalg.norm(dirs, axis=-1, keepdims=True)


def backproject(camera: Camera, depth: np.ndarray) -> np.ndarray:
    """World points position + t·dir for a ray-distance depth map, shape (H, W, 3)."""
    return camera.position[None, None, :] + depth[..., None] * ray_directions(camera)
