"""No-reference quality score from natural-scene patch statistics.

An image is locally mean/contrast normalized, asymmetric generalized
Gaussian fits of the normalized coefficients and their four neighbor
products give 18 features per patch at two scales (36 total), and quality
is the Mahalanobis-style distance between the test image's patch-feature
Gaussian and one fitted offline on a pristine corpus.  Lower is better.

Constants (7x7 Gaussian window with sigma 7/6, C = 1/255 on [0,1] rasters,
96-pixel patches, sharpness fraction 0.75, shape grid 0.2:0.001:10) follow
the standard formulation and are pinned for golden reproducibility.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy import ndimage
from scipy.special import gamma as gamma_fn

from .geometry import BICUBIC, resample

PATCH_SIZE = 96
SHARPNESS_FRACTION = 0.75
MSCN_C = 1.0 / 255.0
WINDOW_SIZE = 7
WINDOW_SIGMA = 7.0 / 6.0
FEATURE_DIM = 36
REGULARIZER = 1e-6
MIN_FIT_IMAGES = 20

MODEL_MAGIC = b"NIQ1"
MODEL_VERSION = 1

_SHIFTS = ((0, 1), (1, 0), (1, 1), (1, -1))

_GAMMA_GRID = np.arange(0.2, 10.0 + 1e-9, 0.001)
_R_GAM = gamma_fn(2.0 / _GAMMA_GRID) ** 2 / (
    gamma_fn(1.0 / _GAMMA_GRID) * gamma_fn(3.0 / _GAMMA_GRID)
)
_BETA_FACTOR = np.sqrt(gamma_fn(1.0 / _GAMMA_GRID) / gamma_fn(3.0 / _GAMMA_GRID))
_MEAN_FACTOR = gamma_fn(2.0 / _GAMMA_GRID) / gamma_fn(1.0 / _GAMMA_GRID)


class AggdFitError(ValueError):
    """Samples too degenerate to fit (one-sided or zero variance)."""


class NiqeError(RuntimeError):
    """Scoring or fitting failed; evaluation substitutes the worst value."""


@dataclass(frozen=True)
class AggdFit:
    alpha: float
    sigma_l: float
    sigma_r: float


@dataclass
class NiqeModel:
    mu: np.ndarray
    sigma: np.ndarray
    patch_size: int = PATCH_SIZE
    sharpness_fraction: float = SHARPNESS_FRACTION
    fit_meta: dict = field(default_factory=dict)

    def validate(self) -> None:
        if self.mu.shape != (FEATURE_DIM,) or self.sigma.shape != (FEATURE_DIM, FEATURE_DIM):
            raise ValueError(
                f"model dims {self.mu.shape}/{self.sigma.shape} != ({FEATURE_DIM},)"
            )
        if not np.allclose(self.sigma, self.sigma.T, atol=1e-8):
            raise ValueError("covariance must be symmetric")
        if not 0 < self.sharpness_fraction <= 1:
            raise ValueError(f"sharpness_fraction must be in (0,1], got {self.sharpness_fraction}")


def to_gray(image: np.ndarray) -> np.ndarray:
    """Rec.601 luma for [0,1] RGB rasters; grayscale passes through."""
    arr = np.asarray(image, dtype=np.float64)
    if arr.ndim == 2:
        return arr
    if arr.ndim == 3 and arr.shape[2] == 3:
        return arr[..., 0] * 0.299 + arr[..., 1] * 0.587 + arr[..., 2] * 0.114
    raise ValueError(f"expected HxW or HxWx3 raster, got {arr.shape}")


def gaussian_window(size: int = WINDOW_SIZE, sigma: float = WINDOW_SIGMA) -> np.ndarray:
    half = (size - 1) / 2.0
    coords = np.arange(size) - half
    g1 = np.exp(-(coords**2) / (2.0 * sigma**2))
    win = np.outer(g1, g1)
    return win / win.sum()


def _mscn_and_sigma(gray: np.ndarray, c: float = MSCN_C) -> tuple[np.ndarray, np.ndarray]:
    win = gaussian_window()
    mu = ndimage.correlate(gray, win, mode="nearest")
    var = ndimage.correlate(gray * gray, win, mode="nearest") - mu * mu
    sigma = np.sqrt(np.maximum(var, 0.0))
    return (gray - mu) / (sigma + c), sigma


def mscn_coefficients(gray: np.ndarray, c: float = MSCN_C) -> np.ndarray:
    return _mscn_and_sigma(gray, c)[0]


def estimate_aggd(samples: np.ndarray) -> AggdFit:
    """Moment-matched asymmetric generalized Gaussian parameters."""
    vec = np.asarray(samples, dtype=np.float64).ravel()
    neg = vec[vec < 0]
    pos = vec[vec > 0]
    if neg.size == 0 or pos.size == 0:
        raise AggdFitError("samples must include both signs")
    left_std = np.sqrt(np.mean(neg**2))
    right_std = np.sqrt(np.mean(pos**2))
    if left_std == 0 or right_std == 0:
        raise AggdFitError("zero one-sided variance")
    gammahat = left_std / right_std
    rhat = np.mean(np.abs(vec)) ** 2 / np.mean(vec**2)
    rhatnorm = rhat * (gammahat**3 + 1) * (gammahat + 1) / (gammahat**2 + 1) ** 2
    pos_idx = int(np.argmin((_R_GAM - rhatnorm) ** 2))
    alpha = float(_GAMMA_GRID[pos_idx])
    factor = float(_BETA_FACTOR[pos_idx])
    return AggdFit(alpha=alpha, sigma_l=float(left_std * factor), sigma_r=float(right_std * factor))


def fit_aggd(samples: np.ndarray) -> AggdFit:
    vec = np.asarray(samples, dtype=np.float64).ravel()
    if vec.size < 100:
        raise AggdFitError(f"need at least 100 samples, got {vec.size}")
    if np.var(vec) == 0:
        raise AggdFitError("zero variance")
    return estimate_aggd(vec)


def _patch_features(block: np.ndarray) -> np.ndarray:
    fit = estimate_aggd(block)
    feats = [fit.alpha, (fit.sigma_l + fit.sigma_r) / 2.0]
    for shift in _SHIFTS:
        pair = block * np.roll(block, shift, axis=(0, 1))
        pfit = estimate_aggd(pair)
        mean = (pfit.sigma_r - pfit.sigma_l) * (
            gamma_fn(2.0 / pfit.alpha) / gamma_fn(1.0 / pfit.alpha)
        )
        feats.extend([pfit.alpha, mean, pfit.sigma_l, pfit.sigma_r])
    return np.array(feats)


def image_features(
    image: np.ndarray, patch_size: int = PATCH_SIZE
) -> tuple[np.ndarray, np.ndarray]:
    """Per-patch 36-vector features plus full-scale patch sharpness.

    Patches tile the image row-major; the same grid is reused at half scale
    with half the patch size, so row i of both scales covers the same area.
    """
    gray = to_gray(image)
    h, w = gray.shape
    if h < 2 * patch_size or w < 2 * patch_size:
        raise NiqeError(f"image {h}x{w} smaller than 2x patch size {patch_size}")
    nh, nw = h // patch_size, w // patch_size
    per_scale = []
    sharpness = np.zeros(nh * nw)
    img = gray
    for scale in (1, 2):
        psz = patch_size // scale
        mscn, sigma_map = _mscn_and_sigma(img)
        feats = np.zeros((nh * nw, 18))
        for bi in range(nh):
            for bj in range(nw):
                block = mscn[bi * psz:(bi + 1) * psz, bj * psz:(bj + 1) * psz]
                feats[bi * nw + bj] = _patch_features(block)
                if scale == 1:
                    sharp = sigma_map[bi * psz:(bi + 1) * psz, bj * psz:(bj + 1) * psz]
                    sharpness[bi * nw + bj] = float(sharp.mean())
        per_scale.append(feats)
        if scale == 1:
            img = resample(img, img.shape[0] // 2, img.shape[1] // 2, BICUBIC)
    return np.hstack(per_scale), sharpness


def fit_niqe_model(
    images: Sequence[np.ndarray],
    patch_size: int = PATCH_SIZE,
    sharpness_fraction: float = SHARPNESS_FRACTION,
    min_images: int = MIN_FIT_IMAGES,
) -> NiqeModel:
    """Fit the pristine-corpus Gaussian from the sharpest patches.

    The sharpness gate is strict (> fraction * peak), so an all-flat corpus
    selects nothing and fitting fails rather than producing a junk model.
    """
    if len(images) < min_images:
        raise NiqeError(f"need at least {min_images} images, got {len(images)}")
    if not 0 < sharpness_fraction <= 1:
        raise NiqeError(f"sharpness_fraction must be in (0,1], got {sharpness_fraction}")
    selected = []
    for image in images:
        feats, sharpness = image_features(image, patch_size)
        threshold = sharpness_fraction * float(sharpness.max())
        mask = sharpness > threshold
        if mask.any():
            selected.append(feats[mask])
    if not selected:
        raise NiqeError("no patches pass the sharpness gate")
    stacked = np.vstack(selected)
    if stacked.shape[0] < 2:
        raise NiqeError(f"only {stacked.shape[0]} patch(es) selected, need >= 2")
    mu = stacked.mean(axis=0)
    sigma = np.cov(stacked, rowvar=False)
    model = NiqeModel(
        mu=mu,
        sigma=sigma,
        patch_size=patch_size,
        sharpness_fraction=sharpness_fraction,
        fit_meta={"num_images": len(images), "num_patches": int(stacked.shape[0])},
    )
    model.validate()
    return model


def niqe_detailed(image: np.ndarray, model: NiqeModel) -> tuple[float, bool]:
    """Score plus a flag for whether the pooled covariance was regularized."""
    feats, _ = image_features(image, model.patch_size)
    nu = feats.mean(axis=0)
    sigma_img = np.cov(feats, rowvar=False)
    pooled = (model.sigma + sigma_img) / 2.0
    diff = model.mu - nu
    regularized = False
    try:
        solved = np.linalg.solve(pooled, diff)
        if not np.all(np.isfinite(solved)):
            raise np.linalg.LinAlgError("non-finite solve")
    except np.linalg.LinAlgError:
        regularized = True
        pooled = pooled + REGULARIZER * np.eye(pooled.shape[0])
        solved = np.linalg.solve(pooled, diff)
    quad = float(diff @ solved)
    return float(np.sqrt(max(quad, 0.0))), regularized


def niqe(image: np.ndarray, model: NiqeModel) -> float:
    return niqe_detailed(image, model)[0]


# Model file layout: magic, version, feature dim, patch size, sharpness
# fraction, then mu and row-major sigma as little-endian float64.
_HEADER = struct.Struct("<4sIIId")


def save_model(model: NiqeModel, path) -> Path:
    model.validate()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    blob = _HEADER.pack(
        MODEL_MAGIC,
        MODEL_VERSION,
        FEATURE_DIM,
        model.patch_size,
        model.sharpness_fraction,
    )
    blob += model.mu.astype("<f8").tobytes()
    blob += np.ascontiguousarray(model.sigma, dtype="<f8").tobytes()
    path.write_bytes(blob)
    sidecar = {
        "version": MODEL_VERSION,
        "feature_dim": FEATURE_DIM,
        "patch_size": model.patch_size,
        "sharpness_fraction": model.sharpness_fraction,
        **model.fit_meta,
    }
    Path(str(path) + ".json").write_text(
        json.dumps(sidecar, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )
    return path


def load_model(path) -> NiqeModel:
    blob = Path(path).read_bytes()
    magic, version, dim, patch, sharpness = _HEADER.unpack_from(blob, 0)
    if magic != MODEL_MAGIC:
        raise NiqeError(f"bad model magic {magic!r}")
    if version != MODEL_VERSION:
        raise NiqeError(f"unsupported model version {version}")
    if dim != FEATURE_DIM:
        raise NiqeError(f"unsupported feature dim {dim}")
    offset = _HEADER.size
    mu = np.frombuffer(blob, dtype="<f8", count=dim, offset=offset).copy()
    offset += dim * 8
    sigma = np.frombuffer(blob, dtype="<f8", count=dim * dim, offset=offset).copy()
    meta = {}
    sidecar = Path(str(path) + ".json")
    if sidecar.exists():
        meta = json.loads(sidecar.read_text(encoding="utf-8"))
    model = NiqeModel(
        mu=mu,
        sigma=sigma.reshape(dim, dim),
        patch_size=int(patch),
        sharpness_fraction=float(sharpness),
        fit_meta=meta,
    )
    model.validate()
    return model
