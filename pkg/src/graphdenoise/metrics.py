"""Image quality metrics: PSNR and single-scale SSIM.

SSIM follows the canonical single-scale recipe: an 11x11 Gaussian window
with sigma 1.5, stabilizers C1 = (0.01 * 255)^2 and C2 = (0.03 * 255)^2,
population (not sample) second moments, averaged over every fully interior
window position.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.signal import convolve2d

WINDOW_SIZE = 11
WINDOW_SIGMA = 1.5
K1 = 0.01
K2 = 0.03


def psnr(a, b, peak: float = 255.0) -> float:
    """Peak signal-to-noise ratio in dB; math.inf when the images match."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return math.inf
    return float(10.0 * math.log10(peak * peak / mse))


def ssim(a, b, peak: float = 255.0) -> float:
    """Mean structural similarity over all interior 11x11 windows."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    if min(a.shape) < WINDOW_SIZE:
        raise ValueError(f"images must be at least {WINDOW_SIZE}x{WINDOW_SIZE}, got {a.shape}")
    win = _gaussian_window()
    c1 = (K1 * peak) ** 2
    c2 = (K2 * peak) ** 2
    mu_a = convolve2d(a, win, mode="valid")
    mu_b = convolve2d(b, win, mode="valid")
    var_a = convolve2d(a * a, win, mode="valid") - mu_a**2
    var_b = convolve2d(b * b, win, mode="valid") - mu_b**2
    cov = convolve2d(a * b, win, mode="valid") - mu_a * mu_b
    score = ((2 * mu_a * mu_b + c1) * (2 * cov + c2)) / (
        (mu_a**2 + mu_b**2 + c1) * (var_a + var_b + c2)
    )
    return float(score.mean())


def _gaussian_window() -> np.ndarray:
    half = (WINDOW_SIZE - 1) / 2.0
    coords = np.arange(WINDOW_SIZE) - half
    g = np.exp(-(coords**2) / (2.0 * WINDOW_SIGMA**2))
    win = np.outer(g, g)
    return win / win.sum()
