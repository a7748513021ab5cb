"""Overlapped patch extraction, block matching, and aggregation.

A group stacks the k most similar patches to a reference patch (the
reference itself first) as rows of a (k, patch_size^2) matrix; similarity
is squared Euclidean distance between vectorized patches, searched over
every stride-1 position inside a square window centered on the reference.
Aggregation scatters processed rows back and averages per pixel with
uniform weights.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


@dataclass(frozen=True)
class PatchGroup:
    """One block-matching result.

    reference: (row, col) of the reference patch top-left corner.
    members:   (k, 2) int array of member top-lefts, reference first,
               remaining rows ordered by (distance, row, col).
    values:    (k, patch_size^2) float64 matrix; row i is the row-major
               vectorization of the patch at members[i].
    """

    reference: tuple[int, int]
    members: np.ndarray
    values: np.ndarray

    @property
    def k(self) -> int:
        return self.members.shape[0]


def extract_patch_refs(img: np.ndarray, patch_size: int, stride: int) -> np.ndarray:
    """Top-left positions of the overlapped patch grid, as an (R, 2) array.

    Positions advance by `stride` along each axis; the last valid position
    (extent - patch_size) is always included so every pixel is covered by
    at least one patch.
    """
    img = np.asarray(img, dtype=np.float64)
    h, w = img.shape
    if patch_size > min(h, w):
        raise ValueError(f"patch_size {patch_size} exceeds image extent {h}x{w}")
    if stride < 1:
        raise ValueError(f"stride must be >= 1, got {stride}")
    rows = _axis_positions(h, patch_size, stride)
    cols = _axis_positions(w, patch_size, stride)
    rr, cc = np.meshgrid(rows, cols, indexing="ij")
    return np.stack([rr.ravel(), cc.ravel()], axis=1)


def _axis_positions(extent: int, patch_size: int, stride: int) -> np.ndarray:
    last = extent - patch_size
    pos = list(range(0, last + 1, stride))
    if pos[-1] != last:
        pos.append(last)
    return np.asarray(pos, dtype=np.intp)


def window_bounds(
    ref: tuple[int, int], shape: tuple[int, int], patch_size: int, window: int
) -> tuple[int, int, int, int]:
    """Candidate top-left range (r0, r1, c0, c1), inclusive, for a search window.

    The window counts candidate top-left positions per axis: offsets
    -window//2 .. +(window-1)//2 around the reference (one extra up/left for
    even sizes), clipped to valid patch positions.
    """
    h, w = shape
    lo, hi = -(window // 2), (window - 1) // 2
    r, c = ref
    r0, r1 = max(0, r + lo), min(h - patch_size, r + hi)
    c0, c1 = max(0, c + lo), min(w - patch_size, c + hi)
    return r0, r1, c0, c1


def build_group(
    img: np.ndarray, ref: tuple[int, int], patch_size: int, window: int, k: int
) -> PatchGroup:
    """Match the k nearest patches to `ref` inside its search window."""
    img = np.asarray(img, dtype=np.float64)
    tiles = sliding_window_view(img, (patch_size, patch_size))
    return _match(img.shape, tiles, (int(ref[0]), int(ref[1])), patch_size, window, k)


def build_groups(
    img: np.ndarray, refs: np.ndarray, patch_size: int, window: int, k: int
) -> list[PatchGroup]:
    """build_group for every reference, sharing one patch view of the image."""
    img = np.asarray(img, dtype=np.float64)
    tiles = sliding_window_view(img, (patch_size, patch_size))
    return [
        _match(img.shape, tiles, (int(r), int(c)), patch_size, window, k)
        for r, c in refs
    ]


def _match(shape, tiles, ref, patch_size, window, k):
    if window < patch_size:
        raise ValueError(f"window {window} smaller than patch_size {patch_size}")
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    r, c = ref
    if not (0 <= r < tiles.shape[0] and 0 <= c < tiles.shape[1]):
        raise ValueError(f"reference {ref} out of range for patch grid {tiles.shape[:2]}")
    r0, r1, c0, c1 = window_bounds(ref, shape, patch_size, window)
    block = tiles[r0 : r1 + 1, c0 : c1 + 1]
    n_rows, n_cols = block.shape[:2]
    n_cand = n_rows * n_cols
    if n_cand < k:
        raise ValueError(
            f"only {n_cand} candidates in window around {ref}, need k={k}; "
            "increase the window or shrink k"
        )
    flat = block.reshape(n_cand, patch_size * patch_size)
    ref_vec = tiles[r, c].reshape(-1)
    dist = ((flat - ref_vec) ** 2).sum(axis=1)
    rows = r0 + np.repeat(np.arange(n_rows), n_cols)
    cols = c0 + np.tile(np.arange(n_cols), n_rows)
    order = np.lexsort((cols, rows, dist))

    # Reference always selected and listed first; remaining slots take the
    # best (distance, row, col)-ordered candidates.
    ref_flat = (r - r0) * n_cols + (c - c0)
    top = order[:k]
    if ref_flat in top:
        rest = top[top != ref_flat]
    else:
        rest = order[: k - 1]
    chosen = np.concatenate([[ref_flat], rest]).astype(np.intp)
    members = np.stack([rows[chosen], cols[chosen]], axis=1).astype(np.intp)
    values = flat[chosen].astype(np.float64, copy=True)
    return PatchGroup(reference=(r, c), members=members, values=values)


def aggregate(
    pairs: Iterable[tuple[PatchGroup, np.ndarray]],
    shape: tuple[int, int],
    patch_size: int,
) -> np.ndarray:
    """Average processed group rows back into a (height, width) image.

    Every row of every processed matrix lands on its member's footprint;
    output pixels are sum / count with uniform weights.  Raises if any
    pixel ends up uncovered, which the extract_patch_refs grid rules out.
    """
    sums = np.zeros(shape, dtype=np.float64)
    counts = np.zeros(shape, dtype=np.float64)
    p = patch_size
    for group, mat in pairs:
        mat = np.asarray(mat, dtype=np.float64)
        if mat.shape != group.values.shape:
            raise ValueError(
                f"processed matrix shape {mat.shape} != group shape {group.values.shape}"
            )
        for (r, c), row in zip(group.members, mat):
            sums[r : r + p, c : c + p] += row.reshape(p, p)
            counts[r : r + p, c : c + p] += 1.0
    if (counts == 0).any():
        raise RuntimeError("aggregation left uncovered pixels; patch grid is broken")
    return sums / counts
