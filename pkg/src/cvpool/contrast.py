"""Local contrast (windowed standard deviation) and the contrast-driven pooling percentage."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage


@dataclass(frozen=True)
class CvpConfig:
    sigma: float = 3.0
    c_min: float = 0.01
    x_min: float = 0.1
    x_max: float = 100.0

    def __post_init__(self):
        if not self.sigma >= 1:
            raise ValueError(f"contrast sigma must be >= 1, got {self.sigma}")
        if not 0 < self.c_min <= 0.5:
            raise ValueError(f"c_min must lie in (0, 0.5], got {self.c_min}")
        if not 0 < self.x_min <= self.x_max <= 100:
            raise ValueError(f"need 0 < x_min <= x_max <= 100, got {self.x_min}, {self.x_max}")


@dataclass(frozen=True, eq=False)
class ContrastMap:
    channels: np.ndarray  # (3, H, W)
    valid_mask: np.ndarray  # (H, W) bool


def _box_sum(a: np.ndarray, radius: int) -> np.ndarray:
    """Sum over the (2r+1)^2 window, truncated at the raster edge."""
    ones = np.ones(2 * radius + 1)
    out = ndimage.correlate1d(a, ones, axis=-1, mode="constant", cval=0.0)
    return ndimage.correlate1d(out, ones, axis=-2, mode="constant", cval=0.0)


def local_contrast(fmap, sigma: float = 3.0) -> ContrastMap:
    """Population standard deviation over a square window of half-width ``floor(sigma)``.

    Works on anything exposing ``channels`` (3, H, W) and ``valid_mask``. Invalid
    pixels are left out of both the mean and the deviation sum; a pixel with fewer
    than two valid neighbours becomes invalid.
    """
    if not sigma >= 1:
        raise ValueError(f"contrast sigma must be >= 1, got {sigma}")
    radius = int(math.floor(sigma))
    valid = np.asarray(fmap.valid_mask, dtype=bool)
    weight = valid.astype(np.float64)
    n = _box_sum(weight, radius)
    safe_n = np.maximum(n, 1.0)
    size = 2 * radius + 1

    out = np.zeros(np.shape(fmap.channels), dtype=np.float64)
    for c, channel in enumerate(np.asarray(fmap.channels, dtype=np.float64)):
        # centring on the channel mean keeps the one-pass variance well conditioned
        offset = channel[valid].mean() if valid.any() else 0.0
        v = np.where(valid, channel - offset, 0.0)
        mean = _box_sum(v, radius) / safe_n
        var = _box_sum(v * v, radius) / safe_n - mean * mean
        std = np.sqrt(np.clip(var, 0.0, None))
        hi = ndimage.maximum_filter(np.where(valid, channel, -np.inf), size=size, mode="constant", cval=-np.inf)
        lo = ndimage.minimum_filter(np.where(valid, channel, np.inf), size=size, mode="constant", cval=np.inf)
        std[hi == lo] = 0.0
        out[c] = std

    out_valid = valid & (n >= 2)
    out[:, ~out_valid] = 0.0
    return ContrastMap(out, out_valid)


def cvp_percentage(cmap: ContrastMap, cfg: CvpConfig | None = None) -> np.ndarray:
    """Per-channel pooling percentage: mean over valid pixels of ``1 / max(C, c_min)``.

    The result is in percent and clamped to ``[x_min, x_max]``.
    """
    cfg = cfg or CvpConfig()
    valid = np.asarray(cmap.valid_mask, dtype=bool)
    if not valid.any():
        raise ValueError("contrast map has no valid pixels")
    x = np.empty(3)
    for c, channel in enumerate(cmap.channels):
        inv = 1.0 / np.maximum(channel[valid], cfg.c_min)
        x[c] = np.clip(inv.mean(), cfg.x_min, cfg.x_max)
    return x
