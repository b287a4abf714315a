import numpy as np
import pytest

from cvpool.filters import FeatureMap
from cvpool.imgio import Image


def make_map(values, valid=None) -> FeatureMap:
    """FeatureMap from a (3, H, W) array or a single (H, W) raster replicated to three channels."""
    v = np.asarray(values, dtype=np.float64)
    if v.ndim == 1:
        v = v[None, :]
    if v.ndim == 2:
        v = np.stack([v, v, v])
    if valid is None:
        valid = np.ones(v.shape[1:], dtype=bool)
    return FeatureMap(v, np.asarray(valid, dtype=bool))


def uniform_image(rgb, shape=(8, 8)) -> Image:
    return Image.from_hwc(np.broadcast_to(np.asarray(rgb, dtype=np.float64), shape + (3,)))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: s.split()[1]):
            terminalreporter.write_line(line)
