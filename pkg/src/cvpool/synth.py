"""Synthetic Mondrian scenes rendered under a known illuminant.

A grid of flat patches with uniform random reflectances (optionally one perfect
white patch) is lit by a random illuminant through the diagonal (von Kries)
model, then corrupted with additive Gaussian noise and salt pixels at full scale.
The sensor never saturates in the clean render: the brightest possible clean
value is ``EXPOSURE``.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .imgio import Image, ManifestEntry, write_manifest, write_pnm

EXPOSURE = 0.85
REFLECTANCE_RANGE = (0.05, 0.9)


@dataclass(frozen=True)
class SyntheticSceneSpec:
    patch_grid: tuple[int, int] = (8, 8)
    patch_size: int = 16
    illuminant_range: tuple[float, float] = (0.2, 1.0)  # per-component bounds before normalisation
    noise_sigma: float = 0.0
    salt_fraction: float = 0.0
    include_white_patch: bool = True

    def __post_init__(self):
        rows, cols = self.patch_grid
        if rows < 1 or cols < 1 or self.patch_size < 1:
            raise ValueError("patch grid and patch size must be positive")
        lo, hi = self.illuminant_range
        if not 0 < lo <= hi:
            raise ValueError(f"illuminant range must satisfy 0 < lo <= hi, got {self.illuminant_range}")
        for name in ("noise_sigma", "salt_fraction"):
            value = getattr(self, name)
            if not 0 <= value < 1:
                raise ValueError(f"{name} must lie in [0, 1), got {value}")

    @classmethod
    def from_dict(cls, d: dict) -> "SyntheticSceneSpec":
        d = dict(d)
        for key in ("patch_grid", "illuminant_range"):
            if key in d:
                d[key] = tuple(d[key])
        return cls(**d)


def generate_synthetic(spec: SyntheticSceneSpec, seed: int) -> tuple[Image, np.ndarray]:
    """Render one scene; returns the image and its unit-norm ground-truth illuminant."""
    rng = np.random.default_rng(seed)
    rows, cols = spec.patch_grid
    refl = rng.uniform(*REFLECTANCE_RANGE, size=(rows, cols, 3))
    if spec.include_white_patch:
        refl[rng.integers(rows), rng.integers(cols)] = 1.0

    e = rng.uniform(*spec.illuminant_range, size=3)
    e = e / np.linalg.norm(e)
    gains = EXPOSURE * e / e.max()

    pixels = np.repeat(np.repeat(refl, spec.patch_size, axis=0), spec.patch_size, axis=1) * gains
    if spec.noise_sigma > 0:
        pixels = pixels + rng.normal(0.0, spec.noise_sigma, size=pixels.shape)
    pixels = np.clip(pixels, 0.0, 1.0)
    if spec.salt_fraction > 0:
        h, w = pixels.shape[:2]
        n_salt = int(np.floor(spec.salt_fraction * h * w + 0.5))
        flat = rng.choice(h * w, size=n_salt, replace=False)
        pixels.reshape(-1, 3)[flat] = 1.0
    return Image.from_hwc(pixels, bit_depth_origin=16), e


def write_corpus(spec: SyntheticSceneSpec, seed: int, count: int, out_dir) -> Path:
    """Write ``count`` scenes (seeds ``seed .. seed+count-1``) as 16-bit PPMs plus ``manifest.json``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    entries = []
    for s in range(seed, seed + count):
        img, e = generate_synthetic(spec, s)
        path = out_dir / f"synth_{s:06d}.ppm"
        raw = np.floor(np.clip(img.to_hwc(), 0.0, 1.0) * 65535.0 + 0.5).astype(np.uint16)
        write_pnm(path, raw, maxval=65535)
        entries.append(ManifestEntry(path, e))
    manifest = out_dir / "manifest.json"
    write_manifest(manifest, entries)
    return manifest
