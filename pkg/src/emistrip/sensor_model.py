"""Color-filter-array capture model: RGB image -> Bayer raw mosaic -> RGB.

A sensor sees one color channel per photosite, laid out in a 2x2-periodic
Bayer tile.  ``mosaic`` samples an RGB image through that filter layout and
``demosaic`` reconstructs full RGB by bilinear interpolation (each missing
channel is the round-half-up average of the in-bounds same-color neighbors in
the 3x3 window; the present channel is copied through).  All values are
immutable after construction and safe to share between threads.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import DimensionError


class Channel(enum.IntEnum):
    R = 0
    G = 1
    B = 2


_TILES = {
    "RGGB": ((Channel.R, Channel.G), (Channel.G, Channel.B)),
    "BGGR": ((Channel.B, Channel.G), (Channel.G, Channel.R)),
    "GRBG": ((Channel.G, Channel.R), (Channel.B, Channel.G)),
    "GBRG": ((Channel.G, Channel.B), (Channel.R, Channel.G)),
}


class BayerPattern(enum.Enum):
    """One of the four 2x2 Bayer filter layouts (one R, one B, two G per tile)."""

    RGGB = "RGGB"
    BGGR = "BGGR"
    GRBG = "GRBG"
    GBRG = "GBRG"

    @property
    def tile(self) -> np.ndarray:
        """2x2 array of channel indices; read-only."""
        return _TILE_ARRAYS[self]


_TILE_ARRAYS = {}
for _p in BayerPattern:
    _a = np.array(_TILES[_p.value], dtype=np.int64)
    _a.setflags(write=False)
    _TILE_ARRAYS[_p] = _a


def channel_at(pattern: BayerPattern, row: int, col: int) -> Channel:
    """Filter color of the photosite at (row, col); periodic with period 2.

    RGGB convention: (0,0)=R, (0,1)=G, (1,0)=G, (1,1)=B.
    """
    return Channel(int(pattern.tile[row % 2, col % 2]))


def _check_samples(samples: np.ndarray, bit_depth: int, what: str) -> np.ndarray:
    if not 1 <= bit_depth <= 16:
        raise ValueError(f"{what}: bit_depth must be in [1, 16], got {bit_depth}")
    arr = np.ascontiguousarray(samples, dtype=np.uint16)
    if arr.size and int(arr.max()) >= (1 << bit_depth):
        raise ValueError(f"{what}: sample exceeds {bit_depth}-bit range")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class RawFrame:
    """Single-channel photosite intensities plus the Bayer layout they follow."""

    samples: np.ndarray  # (height, width) uint16
    pattern: BayerPattern
    bit_depth: int = 8

    def __post_init__(self):
        arr = np.asarray(self.samples)
        if arr.ndim != 2:
            raise DimensionError(f"raw samples must be 2-D, got shape {arr.shape}")
        h, w = arr.shape
        if h < 2 or w < 2 or h % 2 or w % 2:
            raise DimensionError(f"raw dimensions must be even and >= 2, got {w}x{h}")
        object.__setattr__(self, "samples", _check_samples(arr, self.bit_depth, "RawFrame"))

    @property
    def height(self) -> int:
        return self.samples.shape[0]

    @property
    def width(self) -> int:
        return self.samples.shape[1]


@dataclass(frozen=True)
class RgbImage:
    """Full-color image as an (height, width, 3) plane stack."""

    planes: np.ndarray  # (height, width, 3) uint16
    bit_depth: int = 8

    def __post_init__(self):
        arr = np.asarray(self.planes)
        if arr.ndim != 3 or arr.shape[2] != 3:
            raise DimensionError(f"planes must have shape (h, w, 3), got {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise DimensionError("image must be non-empty")
        object.__setattr__(self, "planes", _check_samples(arr, self.bit_depth, "RgbImage"))

    @property
    def height(self) -> int:
        return self.planes.shape[0]

    @property
    def width(self) -> int:
        return self.planes.shape[1]

    @classmethod
    def constant(cls, width: int, height: int, color, bit_depth: int = 8) -> "RgbImage":
        planes = np.empty((height, width, 3), np.uint16)
        planes[:, :] = np.asarray(color, np.uint16)
        return cls(planes, bit_depth)


def mosaic(image: RgbImage, pattern: BayerPattern) -> RawFrame:
    """Sample an RGB image through the Bayer filter layout.

    raw[r, c] takes the plane named by ``channel_at(pattern, r, c)``.
    """
    h, w = image.height, image.width
    if h < 2 or w < 2 or h % 2 or w % 2:
        raise DimensionError(f"mosaic requires even dimensions >= 2, got {w}x{h}")
    chan = pattern.tile[np.arange(h)[:, None] & 1, np.arange(w)[None, :] & 1]
    raw = image.planes[np.arange(h)[:, None], np.arange(w)[None, :], chan]
    return RawFrame(raw, pattern, image.bit_depth)


def demosaic(raw: RawFrame) -> RgbImage:
    """Reconstruct RGB from a Bayer raw frame by bilinear interpolation.

    Missing channels average the in-bounds same-color neighbors of the 3x3
    window, rounding half-up; the site's own channel is copied unchanged.
    Deliberately trusts ``raw.pattern``: content that has slipped by an odd
    number of rows is misinterpreted, which is the colored-strip mechanism.
    """
    planes = _kernels.demosaic_samples(raw.samples, raw.pattern.tile)
    return RgbImage(planes, raw.bit_depth)
