"""Crop/resize geometry shared by the chain driver and every SR backend.

All rasters are numpy float arrays in [0, 1], shape (H, W) or (H, W, 3).
One geometry implementation serves the whole engine so that transcripts
are reproducible bit-for-bit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

NEAREST = "nearest"
BICUBIC = "bicubic"

# Catmull-Rom coefficient for the cubic kernel (pinned for golden tests).
CUBIC_A = -0.5


class GeometryError(ValueError):
    """Raised on configuration errors (bad sides, bad scales)."""


@dataclass(frozen=True)
class Rect:
    """Axis-aligned rectangle in original-image pixel coordinates."""

    x: int
    y: int
    w: int
    h: int

    def contains(self, other: "Rect") -> bool:
        return (
            self.x <= other.x
            and self.y <= other.y
            and other.x + other.w <= self.x + self.w
            and other.y + other.h <= self.y + self.h
        )

    def as_tuple(self) -> tuple[int, int, int, int]:
        return (self.x, self.y, self.w, self.h)


def shrink_rect(rect: Rect, s: int) -> Rect:
    """Shrink ``rect`` about its center by integer factor ``s``.

    Rounding rule: the new side is floor(side / s) and the origin offset is
    floor((side - new_side) / 2).  Exact whenever the side is divisible by s.
    """
    if s < 2:
        raise GeometryError(f"scale factor must be >= 2, got {s}")
    new_w = max(1, rect.w // s)
    new_h = max(1, rect.h // s)
    return Rect(
        x=rect.x + (rect.w - new_w) // 2,
        y=rect.y + (rect.h - new_h) // 2,
        w=new_w,
        h=new_h,
    )


def center_crop(img: np.ndarray, s: int) -> np.ndarray:
    """Return the centered (side/s)-sized sub-window of a square raster."""
    if s < 2:
        raise GeometryError(f"scale factor must be >= 2, got {s}")
    side = img.shape[0]
    if img.shape[1] != side:
        raise GeometryError(f"expected square raster, got {img.shape[0]}x{img.shape[1]}")
    if side % s != 0:
        raise GeometryError(f"side {side} not divisible by scale {s}")
    new = side // s
    off = (side - new) // 2
    return img[off : off + new, off : off + new].copy()


def _cubic_weight(x: np.ndarray) -> np.ndarray:
    """Keys cubic kernel with a = CUBIC_A (Catmull-Rom)."""
    ax = np.abs(x)
    a = CUBIC_A
    w = np.zeros_like(ax)
    inner = ax <= 1.0
    outer = (ax > 1.0) & (ax < 2.0)
    w[inner] = (a + 2.0) * ax[inner] ** 3 - (a + 3.0) * ax[inner] ** 2 + 1.0
    w[outer] = a * (ax[outer] ** 3 - 5.0 * ax[outer] ** 2 + 8.0 * ax[outer] - 4.0)
    return w


def _nearest_index_map(src_n: int, dst_n: int) -> np.ndarray:
    # floor((j + 0.5) * src/dst) in exact integer arithmetic
    j = np.arange(dst_n, dtype=np.int64)
    return ((2 * j + 1) * src_n) // (2 * dst_n)


def _cubic_weight_matrix(src_n: int, dst_n: int) -> np.ndarray:
    """Dense (dst_n, src_n) row-resampling matrix for the Catmull-Rom kernel.

    Source coordinates are clamped at the borders, so each row still sums
    to exactly the kernel's partition of unity.
    """
    u = (np.arange(dst_n, dtype=np.float64) + 0.5) * (src_n / dst_n) - 0.5
    i0 = np.floor(u).astype(np.int64)
    t = u - i0
    mat = np.zeros((dst_n, src_n), dtype=np.float64)
    rows = np.arange(dst_n)
    for k in range(-1, 3):
        idx = np.clip(i0 + k, 0, src_n - 1)
        w = _cubic_weight(t - k)
        np.add.at(mat, (rows, idx), w)
    return mat


def resample(img: np.ndarray, out_h: int, out_w: int, kernel: str = BICUBIC) -> np.ndarray:
    """Resample a raster to (out_h, out_w) with the pinned kernel.

    Output values are clamped to [0, 1].
    """
    if out_h < 1 or out_w < 1:
        raise GeometryError(f"target size must be >= 1, got {out_h}x{out_w}")
    if img.size == 0:
        raise GeometryError("empty raster")
    src_h, src_w = img.shape[:2]
    if kernel == NEAREST:
        ri = _nearest_index_map(src_h, out_h)
        ci = _nearest_index_map(src_w, out_w)
        return img[np.ix_(ri, ci)].copy() if img.ndim == 2 else img[np.ix_(ri, ci)].copy()
    if kernel != BICUBIC:
        raise GeometryError(f"unknown kernel {kernel!r}")
    wr = _cubic_weight_matrix(src_h, out_h)
    wc = _cubic_weight_matrix(src_w, out_w)
    if img.ndim == 2:
        out = wr @ img @ wc.T
    else:
        out = np.einsum("ij,jkc,lk->ilc", wr, img, wc, optimize=True)
    return np.clip(out, 0.0, 1.0)


def resize(raster: np.ndarray, target_side: int, kernel: str) -> np.ndarray:
    """Square resize, the chain-facing entry point."""
    return resample(raster, target_side, target_side, kernel)


def zoom_window(img: np.ndarray, s: int, kernel: str) -> np.ndarray:
    """Center-crop by ``s`` and resize back to the original side.

    This is the per-step degradation every backend undoes: the raster that
    a fixed-window SR model receives as its input.
    """
    side = img.shape[0]
    return resize(center_crop(img, s), side, kernel)
