"""Pixel-level enhancement, geometric ops and wavelet mean fusion.

Images are float64 arrays tagged with their value range: "unit" for [0, 1]
and "byte" for [0, 255]. Byte images may hold fractional values mid-
pipeline; histogram equalization is the only op that insists on integers.
Color images are processed per channel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from . import wavelets

AUGMENT_OPS = ("rot90", "rot180", "rot270", "flip_h", "flip_v")

FUSED_SIZE = (224, 224)  # (width, height) both inputs are resized to before fusion


class ImagingError(ValueError):
    """Raised on range violations, bad parameters or malformed images."""


@dataclass
class ImageGrid:
    """A 2-D or 3-channel pixel array with value-range metadata."""

    pixels: np.ndarray
    value_range: str  # "unit" | "byte"

    def __post_init__(self):
        px = np.asarray(self.pixels, dtype=np.float64)
        if px.ndim == 3 and px.shape[2] == 1:
            px = px[:, :, 0]
        if px.ndim not in (2, 3) or (px.ndim == 3 and px.shape[2] != 3):
            raise ImagingError(f"expected (h, w) or (h, w, 3) pixels, got {px.shape}")
        if self.value_range not in ("unit", "byte"):
            raise ImagingError(f"unknown value range {self.value_range!r}")
        hi = 1.0 if self.value_range == "unit" else 255.0
        if px.size and (px.min() < -1e-9 or px.max() > hi + 1e-9):
            raise ImagingError(
                f"pixel values [{px.min()}, {px.max()}] outside {self.value_range} range"
            )
        self.pixels = np.clip(px, 0.0, hi)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def channels(self) -> int:
        return 1 if self.pixels.ndim == 2 else 3


@dataclass(frozen=True)
class GammaParams:
    """Power-law parameters: out = scale * in ** gamma."""

    gamma: float = 1.0
    scale: float = 1.0

    def __post_init__(self):
        if self.gamma <= 0.0:
            raise ImagingError(f"gamma must be > 0, got {self.gamma}")
        if self.scale <= 0.0:
            raise ImagingError(f"scale must be > 0, got {self.scale}")


def _require_range(img: ImageGrid, expected: str, op: str) -> None:
    if img.value_range != expected:
        raise ImagingError(f"{op} expects a {expected}-range image, got {img.value_range}")


def gamma_correct(img: ImageGrid, params: GammaParams) -> ImageGrid:
    """Per-pixel power law on a unit-range image, clamped back to [0, 1]."""
    _require_range(img, "unit", "gamma_correct")
    out = np.clip(params.scale * np.power(img.pixels, params.gamma), 0.0, 1.0)
    return ImageGrid(out, "unit")


def hist_equalize(img: ImageGrid) -> ImageGrid:
    """CDF remap of integer byte images; constant channels pass through."""
    _require_range(img, "byte", "hist_equalize")
    px = img.pixels
    if not np.array_equal(px, np.round(px)):
        raise ImagingError("hist_equalize needs integer-valued pixels")
    chans = px[:, :, None] if px.ndim == 2 else px
    out = np.empty_like(chans)
    n = chans.shape[0] * chans.shape[1]
    for c in range(chans.shape[2]):
        values = chans[:, :, c].astype(np.int64)
        hist = np.bincount(values.reshape(-1), minlength=256)
        cdf = np.cumsum(hist)
        cdf_min = cdf[np.nonzero(hist)[0][0]]
        if n == cdf_min:  # constant channel
            out[:, :, c] = chans[:, :, c]
            continue
        lut = np.floor((cdf - cdf_min) / (n - cdf_min) * 255.0 + 0.5)
        out[:, :, c] = lut[values]
    return ImageGrid(out[:, :, 0] if px.ndim == 2 else out, "byte")


def resize_bilinear(img: ImageGrid, width: int, height: int) -> ImageGrid:
    """Pixel-center-aligned bilinear resample; exact for constant images."""
    if width < 1 or height < 1:
        raise ImagingError(f"target size must be positive, got {width}x{height}")
    px = img.pixels
    if (img.width, img.height) == (width, height):
        return ImageGrid(px.copy(), img.value_range)
    src_h, src_w = px.shape[0], px.shape[1]
    ys = np.clip((np.arange(height) + 0.5) * src_h / height - 0.5, 0.0, src_h - 1.0)
    xs = np.clip((np.arange(width) + 0.5) * src_w / width - 0.5, 0.0, src_w - 1.0)
    y0 = np.floor(ys).astype(np.int64)
    x0 = np.floor(xs).astype(np.int64)
    y1 = np.minimum(y0 + 1, src_h - 1)
    x1 = np.minimum(x0 + 1, src_w - 1)
    wy = (ys - y0)[:, None]
    wx = (xs - x0)[None, :]
    if px.ndim == 3:
        wy = wy[:, :, None]
        wx = wx[:, :, None]
    top = px[y0][:, x0] * (1 - wx) + px[y0][:, x1] * wx
    bot = px[y1][:, x0] * (1 - wx) + px[y1][:, x1] * wx
    return ImageGrid(top * (1 - wy) + bot * wy, img.value_range)


def augment(img: ImageGrid, op: str) -> ImageGrid:
    """Exact pixel permutations: quarter-turn rotations and axis flips."""
    px = img.pixels
    if op == "rot90":
        out = np.rot90(px, 1)
    elif op == "rot180":
        out = np.rot90(px, 2)
    elif op == "rot270":
        out = np.rot90(px, 3)
    elif op == "flip_h":
        out = px[:, ::-1]
    elif op == "flip_v":
        out = px[::-1]
    else:
        raise ImagingError(f"unknown augment op {op!r}; choose from {AUGMENT_OPS}")
    return ImageGrid(out.copy(), img.value_range)


def rescale_unit(img: ImageGrid) -> ImageGrid:
    """byte -> unit by dividing by 255."""
    _require_range(img, "byte", "rescale_unit")
    return ImageGrid(img.pixels / 255.0, "unit")


def to_byte(img: ImageGrid) -> ImageGrid:
    """unit -> byte by scaling to 255 and rounding half-up."""
    _require_range(img, "unit", "to_byte")
    return ImageGrid(np.floor(img.pixels * 255.0 + 0.5), "byte")


def _byte_scale_pixels(img: ImageGrid) -> np.ndarray:
    return img.pixels * 255.0 if img.value_range == "unit" else img.pixels


def fuse_mean_raw(a: ImageGrid, b: ImageGrid, levels: int) -> np.ndarray:
    """Decompose-average-reconstruct, before any range normalization.

    Inputs must already share dimensions; the result is a float array on
    the byte scale. By linearity of the transform this equals the pixel-
    wise mean of the (byte-scale) inputs up to float error.
    """
    if (a.width, a.height, a.channels) != (b.width, b.height, b.channels):
        raise ImagingError(
            f"fusion inputs disagree: {a.width}x{a.height}x{a.channels} vs "
            f"{b.width}x{b.height}x{b.channels}"
        )
    pa = wavelets.decompose(_byte_scale_pixels(a), levels)
    pb = wavelets.decompose(_byte_scale_pixels(b), levels)
    return wavelets.reconstruct(wavelets.fuse_pyramids(pa, pb))


def fuse_mean(
    a: ImageGrid, b: ImageGrid, levels: int = 2,
    size: tuple[int, int] | None = FUSED_SIZE,
) -> ImageGrid:
    """Level-by-level wavelet mean fusion to a byte image.

    Both inputs are first resized to `size` (width, height) when given.
    The reconstruction is min-max normalized to [0, 255]; a degenerate
    zero-range result skips normalization and is clamped instead.
    """
    if size is not None:
        a = resize_bilinear(a, size[0], size[1])
        b = resize_bilinear(b, size[0], size[1])
    fused = fuse_mean_raw(a, b, levels)
    lo, hi = fused.min(), fused.max()
    if hi > lo:
        fused = (fused - lo) / (hi - lo) * 255.0
    else:
        fused = np.clip(fused, 0.0, 255.0)
    return ImageGrid(np.floor(fused + 0.5), "byte")


def read_image(path: str | Path) -> ImageGrid:
    """Load an 8-bit PNG or JPEG as a byte-range grid (grayscale or RGB)."""
    with Image.open(path) as im:
        if im.mode not in ("L", "RGB"):
            im = im.convert("RGB" if im.mode in ("RGBA", "P", "CMYK") else "L")
        px = np.asarray(im, dtype=np.float64)
    return ImageGrid(px, "byte")


def write_png(img: ImageGrid, path: str | Path) -> None:
    """Write as 8-bit PNG, rounding byte values / scaling unit ones."""
    px = img.pixels if img.value_range == "byte" else img.pixels * 255.0
    arr = np.floor(px + 0.5).astype(np.uint8)
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(arr, mode="L" if arr.ndim == 2 else "RGB").save(path, format="PNG")
