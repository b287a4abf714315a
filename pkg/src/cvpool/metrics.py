"""Angular error measures and outlier-robust summaries."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np


@dataclass(frozen=True)
class ErrorStats:
    n: int
    mean: float
    median: float
    trimean: float
    best25_mean: float
    worst25_mean: float

    def as_dict(self) -> dict:
        return asdict(self)


def _angle_deg(a: np.ndarray, b: np.ndarray) -> float:
    # atan2 of |a x b| and a . b equals the arccos of the cosine but stays
    # accurate near 0 deg, where arccos turns one ulp into ~1e-6 deg
    return math.degrees(math.atan2(float(np.linalg.norm(np.cross(a, b))), float(np.dot(a, b))))


def recovery_error(e_est, e_true) -> float:
    """Angle in degrees between estimated and true illuminant."""
    a = np.asarray(e_est, dtype=np.float64)
    b = np.asarray(e_true, dtype=np.float64)
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        raise ValueError("recovery error undefined for a zero-norm illuminant")
    return _angle_deg(a / na, b / nb)


def reproduction_error(e_est, e_true) -> float:
    """Angle between ``e_true / e_est`` (componentwise) and the neutral axis, in degrees."""
    a = np.asarray(e_est, dtype=np.float64)
    b = np.asarray(e_true, dtype=np.float64)
    if np.any(a <= 0):
        raise ValueError(f"reproduction error needs a strictly positive estimate, got {a}")
    w = b / a
    nw = np.linalg.norm(w)
    if nw == 0:
        raise ValueError("reproduction error undefined for a zero-norm ground truth")
    return _angle_deg(w / nw, np.full(3, 1.0 / math.sqrt(3.0)))


def summarize(errors) -> ErrorStats:
    """Mean, median, trimean and best/worst-quarter means.

    Quartiles interpolate linearly between order statistics at position
    ``(n - 1) * q`` (numpy's default "linear" method); the quarter means use
    ``ceil(n / 4)`` values.
    """
    e = np.sort(np.asarray(errors, dtype=np.float64))
    if e.size == 0:
        raise ValueError("cannot summarize an empty error list")
    q1, q2, q3 = np.quantile(e, [0.25, 0.5, 0.75], method="linear")
    quarter = math.ceil(e.size / 4)
    return ErrorStats(
        n=int(e.size),
        mean=float(e.mean()),
        median=float(np.median(e)),
        trimean=float((q1 + 2.0 * q2 + q3) / 4.0),
        best25_mean=float(e[:quarter].mean()),
        worst25_mean=float(e[-quarter:].mean()),
    )
