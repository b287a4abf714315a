"""Illuminant estimators with pluggable pooling, and von Kries correction.

All estimators return a unit-norm RGB vector (numpy array of shape (3,)).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DegenerateFeatureMapError
from .filters import FeatureMap, dog_response, edge_feature_map, erode_mask, kernel_radius
from .imgio import Image
from .pooling import PoolingSpec, PoolResult, pool

METHODS = ("white_patch", "grey_world", "grey_edge_1", "grey_edge_2", "double_opponency")
SIGMA_METHODS = ("grey_edge_1", "grey_edge_2", "double_opponency")

# below this the pooled vector is numerical noise (inputs are normalised to [0, 1])
DEGENERATE_NORM = 1e-10

# rows: red-green, yellow-blue, luminance; orthonormal so the inverse is the transpose
OPPONENT = np.array(
    [
        [1 / math.sqrt(2), -1 / math.sqrt(2), 0.0],
        [1 / math.sqrt(6), 1 / math.sqrt(6), -2 / math.sqrt(6)],
        [1 / math.sqrt(3), 1 / math.sqrt(3), 1 / math.sqrt(3)],
    ]
)


@dataclass(frozen=True)
class EstimatorSpec:
    method: str
    pooling: PoolingSpec | None = field(default_factory=PoolingSpec)
    sigma: float | None = None
    k_surround: float | None = None
    surround_ratio: float = 3.0

    def __post_init__(self):
        m = self.method
        if m not in METHODS:
            raise ConfigError(f"unknown method {m!r}; expected one of {METHODS}")
        if m in SIGMA_METHODS:
            if self.sigma is None or not self.sigma > 0:
                raise ConfigError(f"{m} needs sigma > 0, got {self.sigma}")
        elif self.sigma is not None:
            raise ConfigError(f"{m} takes no sigma")
        if m == "double_opponency":
            if self.k_surround is None or not 0 <= self.k_surround <= 1:
                raise ConfigError(f"double_opponency needs k_surround in [0, 1], got {self.k_surround}")
            if not self.surround_ratio > 1:
                raise ConfigError(f"surround_ratio must be > 1, got {self.surround_ratio}")
        elif self.k_surround is not None:
            raise ConfigError(f"{m} takes no k_surround")
        if m == "grey_world":
            p = self.pooling
            if p is not None and not (p.kind == "minkowski" and p.p == 1):
                raise ConfigError(f"grey_world is Minkowski p=1 pooling by definition; got pooling {p.label!r}")
        elif self.pooling is None:
            raise ConfigError(f"{m} needs a pooling spec")

    @property
    def pooling_label(self) -> str:
        return "minkowski:1" if self.pooling is None else self.pooling.label


@dataclass(frozen=True, eq=False)
class Estimate:
    illuminant: np.ndarray
    pooled: PoolResult


def _normalize(values) -> np.ndarray:
    v = np.asarray(values, dtype=np.float64)
    norm = float(np.linalg.norm(v))
    if not np.all(np.isfinite(v)) or norm <= DEGENERATE_NORM:
        raise DegenerateFeatureMapError(f"degenerate feature map (pooled vector {v})")
    return v / norm


def _pool_and_normalize(fmap, pooling: PoolingSpec) -> Estimate:
    res = pool(fmap, pooling)
    return Estimate(_normalize(res.values), res)


def intensity_map(img: Image) -> FeatureMap:
    return FeatureMap(img.channels, img.valid_mask)


def to_opponent(rgb: np.ndarray) -> np.ndarray:
    """Planar (3, ...) RGB to opponent channels."""
    return np.tensordot(OPPONENT, rgb, axes=1)


def from_opponent(opp: np.ndarray) -> np.ndarray:
    return np.tensordot(OPPONENT.T, opp, axes=1)


def double_opponency_map(img: Image, sigma: float, k_surround: float, surround_ratio: float = 3.0) -> FeatureMap:
    """DoG on opponent channels, mapped back to RGB and half-wave rectified."""
    opp = to_opponent(img.channels)
    resp = np.stack([dog_response(o, sigma, surround_ratio, k_surround) for o in opp])
    rgb = np.maximum(from_opponent(resp), 0.0)
    support = kernel_radius(surround_ratio * sigma if k_surround > 0 else sigma)
    return FeatureMap(rgb, erode_mask(img.valid_mask, support))


def white_patch(img: Image, pooling: PoolingSpec | None = None) -> np.ndarray:
    return _pool_and_normalize(intensity_map(img), pooling or PoolingSpec()).illuminant


def grey_world(img: Image) -> np.ndarray:
    return _pool_and_normalize(intensity_map(img), PoolingSpec("minkowski", p=1)).illuminant


def grey_edge(img: Image, order: int = 1, sigma: float = 1.0, pooling: PoolingSpec | None = None) -> np.ndarray:
    fmap = edge_feature_map(img, sigma, order)
    return _pool_and_normalize(fmap, pooling or PoolingSpec()).illuminant


def double_opponency(
    img: Image, sigma: float = 1.0, k_surround: float = 0.5, pooling: PoolingSpec | None = None, surround_ratio: float = 3.0
) -> np.ndarray:
    fmap = double_opponency_map(img, sigma, k_surround, surround_ratio)
    return _pool_and_normalize(fmap, pooling or PoolingSpec()).illuminant


def feature_map(img: Image, spec: EstimatorSpec) -> FeatureMap:
    if spec.method in ("white_patch", "grey_world"):
        return intensity_map(img)
    if spec.method == "grey_edge_1":
        return edge_feature_map(img, spec.sigma, 1)
    if spec.method == "grey_edge_2":
        return edge_feature_map(img, spec.sigma, 2)
    return double_opponency_map(img, spec.sigma, spec.k_surround, spec.surround_ratio)


def estimate(img: Image, spec: EstimatorSpec) -> Estimate:
    """Run one configured estimator, keeping the pooling details (x_c, counts) alongside the result."""
    pooling = spec.pooling if spec.pooling is not None else PoolingSpec("minkowski", p=1)
    return _pool_and_normalize(feature_map(img, spec), pooling)


def correct_image(img: Image, e) -> Image:
    """Von Kries correction mapping illuminant ``e`` to neutral: ``out_c = in_c / (sqrt(3) e_c)``.

    Values may exceed 1; clamping happens only when saving.
    """
    e = np.asarray(e, dtype=np.float64)
    if e.shape != (3,) or np.any(~(e > 0)):
        raise ValueError(f"correction needs a strictly positive illuminant, got {e}")
    gains = (1.0 / math.sqrt(3.0)) / e
    return Image(img.channels * gains[:, None, None], img.valid_mask, img.bit_depth_origin)
