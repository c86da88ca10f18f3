"""Row-loss corruption of raw frames and the resulting colored strips.

The modeled fault: interference flips bits on the sensor link, the checksum
rejects whole raw rows, and the receiver packs subsequent rows upward without
telling the demosaicer.  Readout rows that land an odd number of positions
above where they were captured flip Bayer row phase and demosaic to wrong
colors; that is the "colored strip".

Bottom fill replicates the last surviving row *pair* (each padded row copies
the row two above), which keeps the pad's Bayer phase consistent with the
content that reached it.  A ``black`` fill mode zeroes the pad instead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np

from .errors import PairingError, ParameterError
from .sensor_model import BayerPattern, RawFrame, RgbImage, demosaic, mosaic

_MASK64 = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB

_FILL_MODES = ("replicate", "black")


@dataclass(frozen=True)
class AttackDeviceMetadata:
    """Physical parameters of the interference source; provenance only."""

    attack_frequency_hz: Optional[float] = None
    attack_power_w: Optional[float] = None
    probe_distance_m: Optional[float] = None

    def __post_init__(self):
        for name in ("attack_frequency_hz", "attack_power_w", "probe_distance_m"):
            value = getattr(self, name)
            if value is not None and not value > 0:
                raise ParameterError(f"{name} must be strictly positive, got {value}")


@dataclass(frozen=True)
class AttackSpec:
    """Which raw rows are lost: an explicit set, or per-row Bernoulli sampling.

    ``resync_interval`` (rows) splits the readout into segments that re-align
    independently; row loss then shifts and discolors content only within its
    own segment.  Default off: a single global drop-and-shift.
    """

    rows: Optional[tuple] = None
    p_row: Optional[float] = None
    seed: Optional[int] = None
    resync_interval: Optional[int] = None

    def __post_init__(self):
        explicit = self.rows is not None
        stochastic = self.p_row is not None or self.seed is not None
        if explicit == stochastic:
            raise ParameterError("AttackSpec needs either rows or (p_row, seed), not both")
        if explicit:
            rows = tuple(sorted({int(r) for r in self.rows}))
            if rows and rows[0] < 0:
                raise ParameterError(f"negative row index {rows[0]}")
            object.__setattr__(self, "rows", rows)
        else:
            if self.p_row is None or self.seed is None:
                raise ParameterError("stochastic AttackSpec needs both p_row and seed")
            if not 0.0 <= self.p_row <= 1.0:
                raise ParameterError(f"p_row must be in [0, 1], got {self.p_row}")
        if self.resync_interval is not None and self.resync_interval < 1:
            raise ParameterError(f"resync_interval must be positive, got {self.resync_interval}")

    @classmethod
    def explicit(cls, rows: Iterable[int], resync_interval: Optional[int] = None) -> "AttackSpec":
        return cls(rows=tuple(rows), resync_interval=resync_interval)

    @classmethod
    def stochastic(cls, p_row: float, seed: int, resync_interval: Optional[int] = None) -> "AttackSpec":
        return cls(p_row=p_row, seed=seed, resync_interval=resync_interval)

    @property
    def is_explicit(self) -> bool:
        return self.rows is not None

    def resolve_rows(self, height: int) -> tuple:
        """The dropped-row set this spec produces for a frame of ``height`` rows."""
        if self.is_explicit:
            if self.rows and self.rows[-1] >= height:
                raise ParameterError(
                    f"row index {self.rows[-1]} out of range for height {height}"
                )
            return self.rows
        return sample_corrupted_rows(height, self.p_row, self.seed)


@dataclass(frozen=True)
class InjectionResult:
    """Outcome of one injection: the corrupted raw frame plus diagnostics."""

    attacked: RawFrame
    dropped_rows: tuple
    strip_bands: tuple  # ((start, end), ...) half-open, output coordinates

    def __post_init__(self):
        h = self.attacked.height
        prev_end = 0
        for start, end in self.strip_bands:
            if not (0 <= prev_end <= start < end <= h):
                raise ParameterError(f"strip bands malformed: {self.strip_bands}")
            prev_end = end


def sample_corrupted_rows(height: int, p_row: float, seed: int) -> tuple:
    """Independently drop each row with probability ``p_row``.

    Uses SplitMix64: the i-th draw is ``mix(seed + (i+1) * 0x9E3779B97F4A7C15)``
    with the standard xor-shift/multiply finalizer, and row i is dropped iff
    that 64-bit value is below ``ceil(p_row * 2**64)``.  Pure integer
    arithmetic, so identical inputs give identical output on every platform.
    """
    if height < 1:
        raise ParameterError(f"height must be >= 1, got {height}")
    if not 0.0 <= p_row <= 1.0:
        raise ParameterError(f"p_row must be in [0, 1], got {p_row}")
    if p_row == 0.0:
        return ()
    if p_row == 1.0:
        return tuple(range(height))
    threshold = math.ceil(p_row * 2.0**64)  # exact: scaling a float by 2**64
    idx = np.arange(1, height + 1, dtype=np.uint64)
    z = np.uint64(seed & _MASK64) + idx * np.uint64(_GAMMA)
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
    z = z ^ (z >> np.uint64(31))
    return tuple(np.flatnonzero(z < np.uint64(threshold)).tolist())


def _validated_rows(rows: Iterable[int], height: int) -> tuple:
    out = tuple(sorted({int(r) for r in rows}))
    if out and (out[0] < 0 or out[-1] >= height):
        raise ParameterError(f"row indices {out[0]}..{out[-1]} outside [0, {height})")
    return out


def _segment_bounds(height: int, resync_interval: Optional[int]):
    if resync_interval is None:
        return ((0, height),)
    if resync_interval < 1:
        raise ParameterError(f"resync_interval must be positive, got {resync_interval}")
    return tuple(
        (lo, min(lo + resync_interval, height)) for lo in range(0, height, resync_interval)
    )


def _source_rows(height: int, rows: tuple, resync_interval: Optional[int]):
    """Map each output row to the original raw row whose content lands there.

    Within each resync segment the surviving rows pack to the top; padded
    positions copy the row two above (same Bayer phase), or hold -1 when the
    segment lost every row.  Returns (source, pad_mask).
    """
    dropped = set(rows)
    src = np.empty(height, np.int64)
    pad = np.zeros(height, bool)
    for lo, hi in _segment_bounds(height, resync_interval):
        k = lo
        for j in range(lo, hi):
            if j not in dropped:
                src[k] = j
                k += 1
        last = k - 1
        for i in range(k, hi):
            pad[i] = True
            if i - 2 >= lo:
                src[i] = src[i - 2]
            elif last >= lo:
                src[i] = src[last]
            else:
                src[i] = -1
    return src, pad


def drop_and_shift(raw: RawFrame, rows: Iterable[int], fill: str = "replicate") -> RawFrame:
    """Discard the given raw rows and pack the survivors upward.

    Output height equals input height; rows above the first drop are
    bit-identical to the input.  The freed bottom rows replicate the last
    surviving row pair (``fill="replicate"``) or are zeroed (``fill="black"``).
    """
    if fill not in _FILL_MODES:
        raise ParameterError(f"fill must be one of {_FILL_MODES}, got {fill!r}")
    dropped = _validated_rows(rows, raw.height)
    src, pad = _source_rows(raw.height, dropped, None)
    out = raw.samples[np.maximum(src, 0)].copy()
    if fill == "black":
        out[pad] = 0
    else:
        out[src < 0] = 0
    return RawFrame(out, raw.pattern, raw.bit_depth)


def predict_strip_bands(
    rows: Iterable[int], height: int, resync_interval: Optional[int] = None
):
    """Predicted discolored output-row intervals for a given dropped-row set.

    An output row is misinterpreted when its content sits an odd number of
    rows above where it was captured (Bayer row-phase flip).  Padded rows
    inherit the phase offset of the content replicated into them; this models
    the default ``replicate`` fill.  With ``resync_interval`` the offset is
    evaluated per segment.  Returns sorted disjoint [start, end) bands.
    """
    dropped = _validated_rows(rows, height)
    src, _ = _source_rows(height, dropped, resync_interval)
    odd = (src >= 0) & ((src - np.arange(height)) % 2 == 1)
    return _runs(odd)


def _runs(mask: np.ndarray):
    """Maximal [start, end) runs of True."""
    bands = []
    start = None
    for i, flag in enumerate(mask):
        if flag and start is None:
            start = i
        elif not flag and start is not None:
            bands.append((start, i))
            start = None
    if start is not None:
        bands.append((start, len(mask)))
    return bands


def inject(
    image: RgbImage,
    pattern: BayerPattern,
    spec: AttackSpec,
    fill: str = "replicate",
):
    """Run the full attacked pipeline: mosaic, drop rows, demosaic blindly.

    The demosaic step deliberately does not compensate the row shift; odd
    cumulative drops flip the Bayer phase of everything below, producing the
    colored strips recorded in the result.  An empty row set reproduces the
    clean pipeline bit-exactly.
    """
    if fill not in _FILL_MODES:
        raise ParameterError(f"fill must be one of {_FILL_MODES}, got {fill!r}")
    raw = mosaic(image, pattern)
    dropped = spec.resolve_rows(raw.height)
    src, pad = _source_rows(raw.height, dropped, spec.resync_interval)
    out = raw.samples[np.maximum(src, 0)].copy()
    if fill == "black":
        out[pad] = 0
    else:
        out[src < 0] = 0
    attacked_raw = RawFrame(out, raw.pattern, raw.bit_depth)
    bands = predict_strip_bands(dropped, raw.height, spec.resync_interval)
    result = InjectionResult(
        attacked=attacked_raw,
        dropped_rows=dropped,
        strip_bands=tuple(bands),
    )
    return demosaic(attacked_raw), result


def detect_strips(
    non_attack: RgbImage, under_attack: RgbImage, diff_threshold: float
):
    """Locate corrupted row bands by comparing a captured pair.

    A row counts as corrupted when its mean absolute per-pixel channel
    difference exceeds ``diff_threshold``; returns maximal [start, end) runs.
    """
    if (non_attack.height, non_attack.width) != (under_attack.height, under_attack.width):
        raise PairingError(
            f"paired images differ in size: "
            f"{non_attack.width}x{non_attack.height} vs {under_attack.width}x{under_attack.height}"
        )
    a = non_attack.planes.astype(np.int64)
    b = under_attack.planes.astype(np.int64)
    row_diff = np.abs(a - b).mean(axis=(1, 2))
    return _runs(row_diff > diff_threshold)
