"""Image persistence: 8-bit RGB PNG and 16-bit binary PGM raw frames.

Raw frame layout (``P5`` PGM): ASCII header ``P5\\n<width> <height>\\n65535\\n``
followed by height*width big-endian 2-byte samples in row-major order.  A
JSON sidecar at ``<path>.json`` records the Bayer pattern and bit depth.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import DimensionError, IngestionError
from .sensor_model import BayerPattern, RawFrame, RgbImage

PGM_MAXVAL = 65535


def save_png(image: RgbImage, path) -> None:
    if image.bit_depth != 8:
        raise DimensionError(f"PNG export is 8-bit only, image has bit_depth {image.bit_depth}")
    Image.fromarray(image.planes.astype(np.uint8), "RGB").save(Path(path), format="PNG")


def load_png(path) -> RgbImage:
    path = Path(path)
    try:
        with Image.open(path) as img:
            arr = np.asarray(img.convert("RGB"), dtype=np.uint16)
    except FileNotFoundError:
        raise IngestionError(f"image file not found: {path}") from None
    return RgbImage(arr, bit_depth=8)


def _sidecar_path(path) -> Path:
    return Path(str(path) + ".json")


def save_raw_pgm(frame: RawFrame, path) -> None:
    path = Path(path)
    header = f"P5\n{frame.width} {frame.height}\n{PGM_MAXVAL}\n".encode("ascii")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(frame.samples.astype(">u2").tobytes())
    meta = {
        "pattern": frame.pattern.value,
        "bit_depth": frame.bit_depth,
        "width": frame.width,
        "height": frame.height,
    }
    with open(_sidecar_path(path), "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_raw_pgm(path) -> RawFrame:
    path = Path(path)
    try:
        blob = path.read_bytes()
    except FileNotFoundError:
        raise IngestionError(f"raw frame not found: {path}") from None
    fields = []
    pos = 0
    while len(fields) < 4:  # magic, width, height, maxval
        while pos < len(blob) and blob[pos : pos + 1].isspace():
            pos += 1
        start = pos
        while pos < len(blob) and not blob[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise IngestionError(f"{path}: truncated PGM header")
        fields.append(blob[start:pos])
    pos += 1  # single whitespace byte after maxval
    if fields[0] != b"P5":
        raise IngestionError(f"{path}: expected binary PGM magic P5, got {fields[0]!r}")
    width, height, maxval = (int(f) for f in fields[1:])
    if maxval != PGM_MAXVAL:
        raise IngestionError(f"{path}: expected maxval {PGM_MAXVAL}, got {maxval}")
    expected = width * height * 2
    data = blob[pos : pos + expected]
    if len(data) != expected:
        raise IngestionError(f"{path}: expected {expected} sample bytes, got {len(data)}")
    samples = np.frombuffer(data, dtype=">u2").reshape(height, width).astype(np.uint16)
    try:
        with open(_sidecar_path(path), "r", encoding="utf-8") as fh:
            meta = json.load(fh)
        pattern = BayerPattern(meta["pattern"])
        bit_depth = int(meta["bit_depth"])
    except FileNotFoundError:
        raise IngestionError(f"missing raw-frame sidecar: {_sidecar_path(path)}") from None
    except (KeyError, ValueError, json.JSONDecodeError) as exc:
        raise IngestionError(f"{_sidecar_path(path)}: bad sidecar ({exc})") from None
    return RawFrame(samples, pattern, bit_depth)
