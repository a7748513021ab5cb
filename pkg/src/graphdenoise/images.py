"""Grayscale image I/O (PGM / 8-bit PNG) and seeded Gaussian noise injection.

Images live in memory as 2-D float64 arrays of shape (height, width) holding
intensities in the nominal [0, 255] range.  Values stay at full precision
throughout processing and are only rounded/clamped when written to disk, so
noisy inputs keep their true additive-Gaussian statistics.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from PIL import Image as _PILImage
from PIL import UnidentifiedImageError


class ImageIOError(Exception):
    """Base class for image reading/writing failures."""


class UnreadableImageError(ImageIOError):
    """File is missing content, truncated, or not parseable at all."""


class UnsupportedImageError(ImageIOError):
    """File parsed, but is not an 8-bit single-channel image."""


@dataclass(frozen=True)
class NoiseSpec:
    """Additive white Gaussian noise: standard deviation and RNG seed."""

    sigma: float
    seed: int

    def __post_init__(self) -> None:
        if not self.sigma > 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")


def as_image(data) -> np.ndarray:
    """Validate and convert to the canonical 2-D float64 representation."""
    img = np.asarray(data, dtype=np.float64)
    if img.ndim != 2 or img.shape[0] < 1 or img.shape[1] < 1:
        raise ValueError(f"expected a non-empty 2-D array, got shape {img.shape}")
    return img


def load_image(path) -> np.ndarray:
    """Load an 8-bit grayscale PGM (P2/P5) or PNG file as a float64 array.

    Pixel values are widened to float64 without rescaling.  Raises
    UnreadableImageError for malformed files and UnsupportedImageError for
    color or >8-bit content.
    """
    path = str(path)
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:8] == b"\x89PNG\r\n\x1a\n":
        return _load_png(path)
    if data[:1] == b"P":
        return _parse_pnm(data, path)
    raise UnreadableImageError(f"{path}: not a PGM or PNG file")


def save_image(img, path) -> None:
    """Write as 8-bit grayscale, rounding half-away-from-zero and clamping.

    The container is chosen by extension: .pgm/.pnm writes binary P5,
    .png writes an 8-bit grayscale PNG.
    """
    img = as_image(img)
    path = str(path)
    pixels = quantize(img).astype(np.uint8)
    lower = path.lower()
    if lower.endswith((".pgm", ".pnm")):
        header = f"P5\n{img.shape[1]} {img.shape[0]}\n255\n".encode("ascii")
        with open(path, "wb") as fh:
            fh.write(header)
            fh.write(pixels.tobytes())
    elif lower.endswith(".png"):
        _PILImage.fromarray(pixels, mode="L").save(path, format="PNG")
    else:
        raise ValueError(f"{path}: unsupported output extension (use .pgm or .png)")


def quantize(img) -> np.ndarray:
    """Clamp to [0, 255] and round half-away-from-zero to whole intensities.

    Returns float64; this is exactly the value grid a saved copy would
    reload as, and is what the quality metrics are measured on.
    """
    clipped = np.clip(np.asarray(img, dtype=np.float64), 0.0, 255.0)
    return np.floor(clipped + 0.5)


def add_awgn(img, spec: NoiseSpec) -> np.ndarray:
    """Add i.i.d. Gaussian noise N(0, sigma^2) from a deterministic stream.

    Draws come from numpy's PCG64 generator (``default_rng(seed)``) via the
    ziggurat normal sampler, so a given (image, spec) pair reproduces the
    same noisy image bit for bit.  The result is NOT clamped: clamping only
    happens on save, keeping the additive noise model intact in memory.
    """
    img = as_image(img)
    rng = np.random.default_rng(spec.seed)
    return img + rng.normal(loc=0.0, scale=spec.sigma, size=img.shape)


def _load_png(path: str) -> np.ndarray:
    try:
        with _PILImage.open(path) as im:
            im.load()
            mode = im.mode
            if mode == "L":
                return np.asarray(im, dtype=np.float64)
    except UnidentifiedImageError as exc:
        raise UnreadableImageError(f"{path}: corrupt PNG ({exc})") from exc
    except OSError as exc:
        raise UnreadableImageError(f"{path}: unreadable PNG ({exc})") from exc
    if mode in ("I", "I;16", "I;16B", "I;16L", "F"):
        raise UnsupportedImageError(f"{path}: unsupported bit depth (PNG mode {mode})")
    raise UnsupportedImageError(f"{path}: unsupported color format (PNG mode {mode})")


def _parse_pnm(data: bytes, path: str) -> np.ndarray:
    pos = 0
    whitespace = b" \t\r\n\x0b\x0c"

    def next_token() -> bytes:
        nonlocal pos
        while pos < len(data):
            if data[pos] in whitespace:
                pos += 1
            elif data[pos] == ord("#"):
                while pos < len(data) and data[pos] not in (ord("\r"), ord("\n")):
                    pos += 1
            else:
                break
        start = pos
        while pos < len(data) and data[pos] not in whitespace:
            pos += 1
        if pos == start:
            raise UnreadableImageError(f"{path}: truncated header")
        return data[start:pos]

    magic = next_token()
    if magic in (b"P3", b"P6"):
        raise UnsupportedImageError(f"{path}: color PPM ({magic.decode()}) is not supported")
    if magic in (b"P1", b"P4"):
        raise UnsupportedImageError(f"{path}: bitmap PBM ({magic.decode()}) is not supported")
    if magic not in (b"P2", b"P5"):
        raise UnreadableImageError(f"{path}: unknown PNM magic {magic!r}")

    try:
        width = int(next_token())
        height = int(next_token())
        maxval = int(next_token())
    except ValueError as exc:
        raise UnreadableImageError(f"{path}: malformed header field ({exc})") from exc
    if width < 1 or height < 1:
        raise UnreadableImageError(f"{path}: invalid dimensions {width}x{height}")
    if maxval > 255:
        raise UnsupportedImageError(f"{path}: unsupported bit depth (maxval {maxval})")
    if maxval < 1:
        raise UnreadableImageError(f"{path}: invalid maxval {maxval}")

    count = width * height
    if magic == b"P5":
        # Exactly one whitespace byte separates the header from the raster.
        if pos >= len(data) or data[pos] not in whitespace:
            raise UnreadableImageError(f"{path}: missing raster separator")
        pos += 1
        raster = data[pos : pos + count]
        if len(raster) < count:
            raise UnreadableImageError(
                f"{path}: truncated pixel data ({len(raster)} of {count} bytes)"
            )
        values = np.frombuffer(raster, dtype=np.uint8, count=count)
    else:
        values = np.empty(count, dtype=np.uint8)
        for i in range(count):
            try:
                sample = int(next_token())
            except UnreadableImageError:
                raise UnreadableImageError(
                    f"{path}: truncated pixel data ({i} of {count} samples)"
                ) from None
            except ValueError as exc:
                raise UnreadableImageError(f"{path}: malformed sample ({exc})") from exc
            if not 0 <= sample <= maxval:
                raise UnreadableImageError(f"{path}: sample {sample} exceeds maxval {maxval}")
            values[i] = sample
    return values.reshape(height, width).astype(np.float64)
