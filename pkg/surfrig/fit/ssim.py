"""
Windowed SSIM and the L1 / D-SSIM photometric loss.
"""

import numpy as np

from surfrig.core.errors import DimensionMismatch

WINDOW_SIZE = 11
WINDOW_SIGMA = 1.5
K1 = 0.01
K2 = 0.03
DATA_RANGE = 1.0


def gaussian_window(size: int = WINDOW_SIZE, sigma: float = WINDOW_SIGMA) -> np.ndarray:
    """Normalized 1D Gaussian taps; the 2D window is their outer product."""
    x = np.arange(size, dtype=np.float64) - (size - 1) / 2.0
    g = np.exp(-(x * x) / (2.0 * sigma * sigma))
    return g / g.sum()


def _filter(channel: np.ndarray, taps: np.ndarray) -> np.ndarray:
    """Separable centered convolution with zero padding; output keeps the input shape."""
    offset = (taps.size - 1) // 2

    def centered(line: np.ndarray) -> np.ndarray:
        return np.convolve(line, taps)[offset:offset + line.size]

    rows = np.apply_along_axis(centered, 1, channel)
    return np.apply_along_axis(centered, 0, rows)


def _check_pair(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise DimensionMismatch(
            f"image shapes differ: {a.shape} vs {b.shape}",
            {"rendered": list(a.shape), "target": list(b.shape)},
        )


def ssim_map(a, b, window_size: int = WINDOW_SIZE, sigma: float = WINDOW_SIGMA) -> np.ndarray:
    """Per-pixel, per-channel SSIM of two (H, W) or (H, W, C) images in [0, 1]."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    _check_pair(a, b)
    squeeze = a.ndim == 2
    if squeeze:
        a, b = a[..., None], b[..., None]
    taps = gaussian_window(window_size, sigma)
    c1 = (K1 * DATA_RANGE) ** 2
    c2 = (K2 * DATA_RANGE) ** 2
    out = np.empty_like(a)
    for ch in range(a.shape[-1]):
        x, y = a[..., ch], b[..., ch]
        mu_x = _filter(x, taps)
        mu_y = _filter(y, taps)
        sxx = _filter(x * x, taps) - mu_x * mu_x
        syy = _filter(y * y, taps) - mu_y * mu_y
        sxy = _filter(x * y, taps) - mu_x * mu_y
        out[..., ch] = ((2.0 * mu_x * mu_y + c1) * (2.0 * sxy + c2)) / (
            (mu_x * mu_x + mu_y * mu_y + c1) * (sxx + syy + c2)
        )
    return out[..., 0] if squeeze else out


def ssim(a, b, window_size: int = WINDOW_SIZE, sigma: float = WINDOW_SIGMA) -> float:
    return float(np.mean(ssim_map(a, b, window_size, sigma)))


def l1_loss(a, b) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    _check_pair(a, b)
    return float(np.mean(np.abs(a - b)))


def photometric_loss(rendered, target, beta: float = 0.8) -> float:
    """
    β·L1 + (1 − β)·D-SSIM with D-SSIM = (1 − SSIM) / 2.

    Raises:
        DimensionMismatch: the images differ in shape.
    """
    l1 = l1_loss(rendered, target)
    dssim = (1.0 - ssim(rendered, target)) / 2.0
    return beta * l1 + (1.0 - beta) * dssim
