"""Depth-image denoising with grouped low-rank shrinkage and learned graphs.

The public surface mirrors the processing stages: image I/O and noise
(`images`), block matching (`patches`), graph construction and Laplacian
learning (`graphs`), the per-group splitting solver (`admm`), quality
metrics (`metrics`), and the outer pipeline (`pipeline`).
"""

from .admm import AdmmConfig, AdmmState, fast_threshold, objective, solve_group, x_step, z_step
from .graphs import (
    GraphLearnConfig,
    check_laplacian,
    kernel_adjacency,
    laplacian_from_weights,
    learn_laplacian,
    smoothness,
    uniform_laplacian,
)
from .images import NoiseSpec, add_awgn, load_image, quantize, save_image
from .metrics import psnr, ssim
from .patches import PatchGroup, aggregate, build_group, extract_patch_refs
from .pipeline import DenoiseReport, ParamSchedule, denoise, outer_regularize, thetas_for_sigma
from .synthetic import region_image

__version__ = "0.1.0"

__all__ = [
    "AdmmConfig",
    "AdmmState",
    "DenoiseReport",
    "GraphLearnConfig",
    "NoiseSpec",
    "ParamSchedule",
    "PatchGroup",
    "add_awgn",
    "aggregate",
    "build_group",
    "check_laplacian",
    "denoise",
    "extract_patch_refs",
    "fast_threshold",
    "kernel_adjacency",
    "laplacian_from_weights",
    "learn_laplacian",
    "load_image",
    "objective",
    "outer_regularize",
    "psnr",
    "quantize",
    "region_image",
    "save_image",
    "smoothness",
    "solve_group",
    "ssim",
    "thetas_for_sigma",
    "uniform_laplacian",
    "x_step",
    "z_step",
]
