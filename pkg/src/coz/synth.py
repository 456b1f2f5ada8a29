"""Deterministic synthetic rasters for tests, demos, and corpus fitting.

Real photo datasets are not bundled, so the test suite and demo scripts draw
from a seeded generator of natural-ish images: smooth low-frequency fields
with edges, gradients, and texture mixed in.  Everything is reproducible
from (seed, index, side) alone.
"""

from __future__ import annotations

import numpy as np

from .geometry import BICUBIC, resample


def _smooth_noise(rng: np.random.Generator, side: int, grid: int) -> np.ndarray:
    """Low-frequency field: coarse noise upsampled with the shared kernel."""
    coarse = rng.random((grid, grid))
    return resample(coarse, side, side, BICUBIC)


def synth_image(seed: int, side: int = 512, channels: int = 3) -> np.ndarray:
    """One synthetic natural-ish image in [0,1], fully determined by args."""
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:side, 0:side] / max(side - 1, 1)
    planes = []
    for _c in range(channels):
        base = _smooth_noise(rng, side, int(rng.integers(3, 7)))
        ramp = rng.random() * xx + rng.random() * yy
        waves = 0.5 + 0.5 * np.sin(
            2 * np.pi * (rng.uniform(1, 4) * xx + rng.uniform(1, 4) * yy + rng.random())
        )
        texture = _smooth_noise(rng, side, int(rng.integers(24, 48)))
        plane = 0.45 * base + 0.2 * ramp + 0.15 * waves + 0.2 * texture
        planes.append(plane)
    img = np.stack(planes, axis=-1) if channels == 3 else planes[0]

    # hard-edged shapes give the sharpness gate something to select
    for _ in range(6):
        cy, cx = rng.integers(0, side, size=2)
        r = int(rng.integers(side // 16, side // 5))
        mask = (yy * (side - 1) - cy) ** 2 + (xx * (side - 1) - cx) ** 2 < r * r
        level = rng.random()
        img[mask] = 0.7 * img[mask] + 0.3 * level
    lo, hi = img.min(), img.max()
    if hi > lo:
        img = (img - lo) / (hi - lo)
    return np.clip(img, 0.0, 1.0)


def synth_corpus(count: int, side: int = 512, seed: int = 0, channels: int = 3) -> list[np.ndarray]:
    return [synth_image(seed * 10_000 + i, side=side, channels=channels) for i in range(count)]


def add_gaussian_noise(image: np.ndarray, sigma: float, seed: int = 0) -> np.ndarray:
    rng = np.random.default_rng(seed)
    noisy = image + rng.normal(0.0, sigma, size=image.shape)
    return np.clip(noisy, 0.0, 1.0)
