"""Pooling operators over feature maps: max, Minkowski-p, top-x% and contrast-variant (CVP)."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .contrast import CvpConfig, cvp_percentage, local_contrast
from .errors import DegenerateFeatureMapError

KINDS = ("max", "minkowski", "top_x", "cvp")


@dataclass(frozen=True)
class PoolingSpec:
    kind: str = "max"
    p: float | None = None
    x: float | None = None
    cvp: CvpConfig = field(default_factory=CvpConfig)
    binned: bool = False

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown pooling kind {self.kind!r}; expected one of {KINDS}")
        if self.kind == "minkowski" and (self.p is None or not 1 <= self.p < math.inf):
            raise ValueError(f"minkowski pooling needs a finite p >= 1, got {self.p}")
        if self.kind == "top_x" and (self.x is None or not 0 < self.x <= 100):
            raise ValueError(f"top_x pooling needs 0 < x <= 100, got {self.x}")

    @property
    def label(self) -> str:
        if self.kind == "minkowski":
            return f"minkowski:{self.p:g}"
        if self.kind == "top_x":
            return f"top_x:{self.x:g}"
        return self.kind

    @classmethod
    def parse(cls, text: str, cvp: CvpConfig | None = None) -> "PoolingSpec":
        """``max``, ``cvp``, ``minkowski:P`` or ``top_x:X``."""
        kind, _, arg = text.partition(":")
        try:
            if kind == "minkowski":
                return cls("minkowski", p=float(arg))
            if kind == "top_x":
                return cls("top_x", x=float(arg))
        except ValueError as exc:
            raise ValueError(f"bad pooling {text!r}: {exc}") from None
        if arg:
            raise ValueError(f"pooling {kind!r} takes no argument")
        return cls(kind, cvp=cvp or CvpConfig())


@dataclass(frozen=True, eq=False)
class PoolResult:
    values: np.ndarray  # (3,) pooled value per channel
    threshold: np.ndarray | None = None  # k_c, smallest pooled value
    count: np.ndarray | None = None  # N_kc, number of pooled pixels
    x_used: np.ndarray | None = None  # percent, cvp only


def _valid_values(fmap) -> list[np.ndarray]:
    valid = np.asarray(fmap.valid_mask, dtype=bool)
    if not valid.any():
        raise DegenerateFeatureMapError("feature map has no valid pixels")
    return [np.asarray(ch, dtype=np.float64)[valid] for ch in fmap.channels]


def pool_max(fmap) -> PoolResult:
    return PoolResult(np.array([v.max() for v in _valid_values(fmap)]))


def pool_minkowski(fmap, p: float) -> PoolResult:
    """Mean-normalised power mean ``(mean(v**p))**(1/p)``, evaluated relative to the max to avoid underflow."""
    if not 1 <= p < math.inf:
        raise ValueError(f"Minkowski norm must be finite and >= 1, got {p}")
    out = []
    for v in _valid_values(fmap):
        if p == 1:
            out.append(v.mean())
            continue
        top = v.max()
        out.append(0.0 if top == 0 else top * np.mean((v / top) ** p) ** (1.0 / p))
    return PoolResult(np.array(out))


def pooled_count(x: float, n_valid: int) -> int:
    """``max(1, round(x/100 * n_valid))`` with halves rounded up."""
    return max(1, int(math.floor(x / 100.0 * n_valid + 0.5)))


def _top_exact(v: np.ndarray, n: int):
    kth = v.size - n
    threshold = np.partition(v, kth)[kth]
    chosen = v[v >= threshold]  # ties at the threshold are all pooled
    # offsets from the threshold keep an all-tied selection bit-exact
    return threshold + (chosen - threshold).mean(), threshold, chosen.size


def _top_binned(v: np.ndarray, n: int, bins: int = 256):
    """Histogram clipping on ``bins`` levels of [0, 1]; whole bins are pooled until ``n`` is reached."""
    levels = np.clip(np.floor(v * (bins - 1) + 0.5), 0, bins - 1).astype(np.int64)
    hist = np.bincount(levels, minlength=bins)
    from_top = np.cumsum(hist[::-1])
    k = bins - 1 - int(np.searchsorted(from_top, n))
    idx = np.arange(k, bins)
    count = int(hist[k:].sum())
    value = float(np.dot(idx, hist[k:])) / (bins - 1) / count
    return value, k / (bins - 1), count


def pool_top_x(fmap, x, binned: bool = False) -> PoolResult:
    """Mean of the largest ``x`` percent of valid values, per channel.

    ``x`` is a scalar or one percentage per channel. Exact selection by default;
    ``binned=True`` applies the 256-level histogram rule meant for 8-bit data.
    """
    xs = np.broadcast_to(np.asarray(x, dtype=np.float64), (3,))
    if np.any(~(xs > 0)) or np.any(xs > 100):
        raise ValueError(f"percentages must lie in (0, 100], got {xs}")
    select = _top_binned if binned else _top_exact
    values, thresholds, counts = [], [], []
    for v, xc in zip(_valid_values(fmap), xs):
        value, thr, cnt = select(v, pooled_count(float(xc), v.size))
        values.append(value)
        thresholds.append(thr)
        counts.append(cnt)
    return PoolResult(np.array(values), np.array(thresholds), np.array(counts, dtype=np.int64))


def pool_cvp(fmap, cfg: CvpConfig | None = None, binned: bool = False) -> PoolResult:
    """Top-x pooling with each channel's x taken from the map's own local contrast."""
    cfg = cfg or CvpConfig()
    _valid_values(fmap)
    cmap = local_contrast(fmap, cfg.sigma)
    if not cmap.valid_mask.any():
        raise DegenerateFeatureMapError("too few valid pixels to measure local contrast")
    x = cvp_percentage(cmap, cfg)
    res = pool_top_x(fmap, x, binned=binned)
    return PoolResult(res.values, res.threshold, res.count, x)


def pool(fmap, spec: PoolingSpec) -> PoolResult:
    if spec.kind == "max":
        return pool_max(fmap)
    if spec.kind == "minkowski":
        return pool_minkowski(fmap, spec.p)
    if spec.kind == "top_x":
        return pool_top_x(fmap, spec.x, binned=spec.binned)
    return pool_cvp(fmap, spec.cvp, binned=spec.binned)
