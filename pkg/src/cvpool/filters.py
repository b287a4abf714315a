"""Separable Gaussian filtering: smoothing, derivatives up to order 2, and DoG responses.

Kernels are truncated at ``ceil(3 sigma)`` and applied as true convolutions with
reflect-101 borders, so an increasing ramp gives a positive first derivative.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .imgio import Image


@dataclass(frozen=True, eq=False)
class Kernel1D:
    taps: np.ndarray
    order: int = 0
    sigma: float = 0.0

    @property
    def radius(self) -> int:
        return len(self.taps) // 2

    @property
    def offsets(self) -> np.ndarray:
        return np.arange(-self.radius, self.radius + 1, dtype=np.float64)

    @classmethod
    def identity(cls) -> "Kernel1D":
        return cls(np.array([1.0]), order=0, sigma=0.0)


@dataclass(frozen=True, eq=False)
class FeatureMap:
    channels: np.ndarray  # (3, H, W), non-negative
    valid_mask: np.ndarray  # (H, W) bool

    @property
    def height(self) -> int:
        return self.channels.shape[1]

    @property
    def width(self) -> int:
        return self.channels.shape[2]


def kernel_radius(sigma: float) -> int:
    return int(math.ceil(3.0 * sigma))


def gaussian_kernel(sigma: float, order: int = 0) -> Kernel1D:
    """Sampled Gaussian, or its first/second derivative, at integer offsets.

    Normalisation: order 0 sums to 1; order 1 returns slope 1 on a unit ramp;
    order 2 is made zero-sum, then scaled to return 2 on ``i**2``.
    """
    if not sigma > 0:
        raise ValueError(f"sigma must be > 0, got {sigma}")
    if order not in (0, 1, 2):
        raise ValueError(f"order must be 0, 1 or 2, got {order}")
    r = kernel_radius(sigma)
    i = np.arange(-r, r + 1, dtype=np.float64)
    g = np.exp(-(i**2) / (2.0 * sigma**2)) / (math.sqrt(2.0 * math.pi) * sigma)
    if order == 0:
        taps = g / g.sum()
    elif order == 1:
        taps = -i / sigma**2 * g
        taps = taps / -np.dot(taps, i)
    else:
        taps = (i**2 / sigma**2 - 1.0) / sigma**2 * g
        taps = taps - taps.mean()
        taps = taps * (2.0 / np.dot(taps, i**2))
    return Kernel1D(taps, order=order, sigma=float(sigma))


def convolve_separable(channel, kx: Kernel1D, ky: Kernel1D) -> np.ndarray:
    """Row pass with ``kx`` then column pass with ``ky``; reflect-101 borders."""
    channel = np.asarray(channel, dtype=np.float64)
    if channel.size == 0:
        raise ValueError("empty channel")
    out = ndimage.convolve1d(channel, kx.taps, axis=-1, mode="mirror")
    return ndimage.convolve1d(out, ky.taps, axis=-2, mode="mirror")


def erode_mask(valid_mask, radius: int) -> np.ndarray:
    """Drop a border of ``radius`` pixels and every pixel within ``radius`` of an invalid one."""
    valid = np.asarray(valid_mask, dtype=bool)
    if radius <= 0:
        return valid.copy()
    size = 2 * radius + 1
    out = ~ndimage.maximum_filter(~valid, size=size, mode="constant", cval=False)
    out[:radius, :] = False
    out[-radius:, :] = False
    out[:, :radius] = False
    out[:, -radius:] = False
    return out


def edge_feature_map(img: Image, sigma: float, order: int = 1) -> FeatureMap:
    """Per-channel Gaussian-derivative magnitude (Grey-Edge feature map).

    Order 2 uses sqrt(fxx^2 + fxy^2 + fyy^2), with the cross term counted once.
    """
    if order not in (1, 2):
        raise ValueError(f"edge order must be 1 or 2, got {order}")
    g0 = gaussian_kernel(sigma, 0)
    g1 = gaussian_kernel(sigma, 1)
    out = np.empty_like(img.channels)
    for c, channel in enumerate(img.channels):
        if order == 1:
            fx = convolve_separable(channel, g1, g0)
            fy = convolve_separable(channel, g0, g1)
            out[c] = np.sqrt(fx**2 + fy**2)
        else:
            g2 = gaussian_kernel(sigma, 2)
            fxx = convolve_separable(channel, g2, g0)
            fyy = convolve_separable(channel, g0, g2)
            fxy = convolve_separable(channel, g1, g1)
            out[c] = np.sqrt(fxx**2 + fxy**2 + fyy**2)
    return FeatureMap(out, erode_mask(img.valid_mask, kernel_radius(sigma)))


def dog_response(channel, sigma: float, surround_ratio: float = 3.0, k_surround: float = 1.0) -> np.ndarray:
    """Centre Gaussian minus ``k_surround`` times a surround Gaussian ``surround_ratio`` times wider."""
    if not sigma > 0:
        raise ValueError(f"sigma must be > 0, got {sigma}")
    if not surround_ratio > 1:
        raise ValueError(f"surround_ratio must be > 1, got {surround_ratio}")
    if not 0 <= k_surround <= 1:
        raise ValueError(f"k_surround must lie in [0, 1], got {k_surround}")
    gc = gaussian_kernel(sigma, 0)
    centre = convolve_separable(channel, gc, gc)
    if k_surround == 0:
        return centre
    gs = gaussian_kernel(surround_ratio * sigma, 0)
    return centre - k_surround * convolve_separable(channel, gs, gs)
