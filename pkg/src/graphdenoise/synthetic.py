"""Synthetic depth-like test images."""

from __future__ import annotations

import numpy as np


def region_image(
    height: int, width: int, levels: tuple[float, float, float, float] = (40.0, 96.0, 160.0, 224.0)
) -> np.ndarray:
    """Piecewise-constant image made of four axis-aligned rectangles.

    Mimics the flat surfaces and sharp depth discontinuities of a rendered
    depth map; deterministic, so tests and benchmarks can regenerate it.
    """
    if height < 2 or width < 2:
        raise ValueError("image must be at least 2x2")
    img = np.empty((height, width), dtype=np.float64)
    r_split = max(1, int(round(0.55 * height)))
    c_top = max(1, int(round(0.40 * width)))
    c_bot = max(1, int(round(0.70 * width)))
    img[:r_split, :c_top] = levels[0]
    img[:r_split, c_top:] = levels[1]
    img[r_split:, :c_bot] = levels[2]
    img[r_split:, c_bot:] = levels[3]
    return img
