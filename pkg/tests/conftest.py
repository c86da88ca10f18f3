import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))  # make oracles importable

from emistrip import BayerPattern, RgbImage, demosaic, mosaic

GOLDEN_DIR = Path(__file__).parent / "golden"


@pytest.fixture(scope="session", autouse=True)
def warm_kernels():
    """Compile the jitted demosaic once so timed tests measure steady state."""
    img = RgbImage.constant(4, 4, (10, 20, 30))
    demosaic(mosaic(img, BayerPattern.RGGB))


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def random_image(rng, width, height, bit_depth=8):
    planes = rng.integers(0, 1 << bit_depth, size=(height, width, 3), dtype=np.uint16)
    return RgbImage(planes, bit_depth)
