"""Orthonormal 2-D Haar decomposition, reconstruction and mean fusion.

The transform is separable: one level averages/differences adjacent rows
then adjacent columns, each step scaled by 1/sqrt(2), and recurses on the
approximation block. Detail triples are ordered (horizontal, vertical,
diagonal): H carries top-vs-bottom row structure, V left-vs-right column
structure.

Odd extents are padded by repeating the edge row/column before each level
and cropped back on reconstruction, so any size >= 2^levels works.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_SQRT2 = np.sqrt(2.0)


class WaveletError(ValueError):
    """Raised for invalid level counts or inconsistent pyramids."""


@dataclass
class WaveletPyramid:
    """Approximation block plus per-level (H, V, D) detail triples.

    details[0] is the coarsest level. shapes[i] records the block shape fed
    into level i (finest first) so reconstruction can crop away padding.
    """

    approx: np.ndarray
    details: list[tuple[np.ndarray, np.ndarray, np.ndarray]]
    shapes: list[tuple[int, int]]

    @property
    def levels(self) -> int:
        return len(self.details)

    def map_blocks(self, fn) -> "WaveletPyramid":
        """Apply fn to every coefficient block, keeping the structure."""
        return WaveletPyramid(
            fn(self.approx),
            [(fn(h), fn(v), fn(d)) for (h, v, d) in self.details],
            list(self.shapes),
        )


def _pad_even(x: np.ndarray) -> np.ndarray:
    pads = [(0, x.shape[0] % 2), (0, x.shape[1] % 2)] + [(0, 0)] * (x.ndim - 2)
    if pads[0][1] or pads[1][1]:
        return np.pad(x, pads, mode="edge")
    return x


def _dwt_level(x: np.ndarray):
    x = _pad_even(x)
    lo = (x[0::2] + x[1::2]) / _SQRT2
    hi = (x[0::2] - x[1::2]) / _SQRT2
    approx = (lo[:, 0::2] + lo[:, 1::2]) / _SQRT2
    v = (lo[:, 0::2] - lo[:, 1::2]) / _SQRT2
    h = (hi[:, 0::2] + hi[:, 1::2]) / _SQRT2
    d = (hi[:, 0::2] - hi[:, 1::2]) / _SQRT2
    return approx, (h, v, d)


def _idwt_level(approx, detail, out_shape):
    h, v, d = detail
    for name, block in (("H", h), ("V", v), ("D", d)):
        if block.shape != approx.shape:
            raise WaveletError(
                f"detail block {name} shape {block.shape} != approx {approx.shape}"
            )
    rows2, cols2 = approx.shape[0] * 2, approx.shape[1] * 2
    lo = np.empty((approx.shape[0], cols2) + approx.shape[2:], dtype=np.float64)
    hi = np.empty_like(lo)
    lo[:, 0::2] = (approx + v) / _SQRT2
    lo[:, 1::2] = (approx - v) / _SQRT2
    hi[:, 0::2] = (h + d) / _SQRT2
    hi[:, 1::2] = (h - d) / _SQRT2
    x = np.empty((rows2, cols2) + approx.shape[2:], dtype=np.float64)
    x[0::2] = (lo + hi) / _SQRT2
    x[1::2] = (lo - hi) / _SQRT2
    return x[: out_shape[0], : out_shape[1]]


def decompose(pixels: np.ndarray, levels: int) -> WaveletPyramid:
    """Run `levels` Haar decompositions, recursing on the approximation."""
    x = np.asarray(pixels, dtype=np.float64)
    if x.ndim not in (2, 3):
        raise WaveletError(f"expected a 2-D or (h, w, c) array, got shape {x.shape}")
    if levels < 1:
        raise WaveletError(f"levels must be >= 1, got {levels}")
    if min(x.shape[0], x.shape[1]) < 2 ** levels:
        raise WaveletError(
            f"image {x.shape[:2]} too small for {levels} levels (needs >= {2 ** levels})"
        )
    details = []
    shapes = []
    for _ in range(levels):
        shapes.append((x.shape[0], x.shape[1]))
        x, triple = _dwt_level(x)
        details.append(triple)
    details.reverse()  # coarsest first
    return WaveletPyramid(x, details, shapes)


def reconstruct(pyr: WaveletPyramid) -> np.ndarray:
    """Exact inverse of decompose up to floating-point error."""
    if len(pyr.shapes) != len(pyr.details):
        raise WaveletError("pyramid level/shape bookkeeping mismatch")
    x = np.asarray(pyr.approx, dtype=np.float64)
    for detail, shape in zip(pyr.details, reversed(pyr.shapes)):
        x = _idwt_level(x, tuple(np.asarray(b, dtype=np.float64) for b in detail), shape)
    return x


def fuse_pyramids(a: WaveletPyramid, b: WaveletPyramid) -> WaveletPyramid:
    """Element-wise mean of the approximation and every detail block."""
    if a.levels != b.levels or a.shapes != b.shapes:
        raise WaveletError("pyramids disagree in level structure")
    details = []
    for (ah, av, ad), (bh, bv, bd) in zip(a.details, b.details):
        details.append(((ah + bh) / 2.0, (av + bv) / 2.0, (ad + bd) / 2.0))
    return WaveletPyramid((a.approx + b.approx) / 2.0, details, list(a.shapes))
