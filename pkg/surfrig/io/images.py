"""
PNG output of render buffers and target image loading (Pillow).
"""

from pathlib import Path
from typing import Dict

import numpy as np
from PIL import Image, UnidentifiedImageError

from surfrig.core.errors import IoError
from surfrig.models.render import RenderBuffers

DEPTH_LEVELS = 65535


def _quantize(values: np.ndarray, levels: int, dtype) -> np.ndarray:
    return np.floor(np.clip(values, 0.0, 1.0) * levels + 0.5).astype(dtype)


def color_to_u8(color: np.ndarray) -> np.ndarray:
    return _quantize(color, 255, np.uint8)


def normal_to_u8(normal: np.ndarray) -> np.ndarray:
    """n·0.5 + 0.5 per channel."""
    return _quantize(np.asarray(normal) * 0.5 + 0.5, 255, np.uint8)


def depth_to_u16(depth: np.ndarray, near: float, far: float) -> np.ndarray:
    """(t − near) / (far − near), clamped, over the full 16-bit range."""
    return _quantize((np.asarray(depth) - near) / (far - near), DEPTH_LEVELS, np.uint16)


def _save(array: np.ndarray, path: Path) -> Path:
    try:
        Image.fromarray(array).save(path, format="PNG")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}", {"path": str(path)}) from exc
    return path


def save_buffers(buffers: RenderBuffers, out_dir, near: float, far: float) -> Dict[str, Path]:
    """
    Write color.png, normal.png, depth.png (16-bit) and transmittance.png.

    Identical buffers produce identical bytes.

    Raises:
        IoError: the directory or a file cannot be written.
    """
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IoError(f"cannot create {out}: {exc}", {"path": str(out)}) from exc
    return {
        "color": _save(color_to_u8(buffers.color), out / "color.png"),
        "normal": _save(normal_to_u8(buffers.normal), out / "normal.png"),
        "depth": _save(depth_to_u16(buffers.depth, near, far), out / "depth.png"),
        "transmittance": _save(color_to_u8(buffers.transmittance), out / "transmittance.png"),
    }


def save_color(color: np.ndarray, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    return _save(color_to_u8(color), path)


def load_image(path) -> np.ndarray:
    """RGB image as float64 in [0, 1], shape (H, W, 3)."""
    path = Path(path)
    try:
        with Image.open(path) as image:
            rgb = np.asarray(image.convert("RGB"), dtype=np.float64)
    except (OSError, UnidentifiedImageError) as exc:
        raise IoError(f"cannot read image {path}: {exc}", {"path": str(path)}) from exc
    return rgb / 255.0
