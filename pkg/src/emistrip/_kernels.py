"""Hot pixel kernels with two interchangeable backends.

The bilinear demosaic dominates runtime for large frames, so it ships as a
numba ``@njit`` loop plus a vectorized pure-numpy fallback.  Backend choice is
controlled by the ``EMISTRIP_BACKEND`` environment variable:

    auto   (default) use numba when importable, else numpy
    numba  require numba, fail if missing
    numpy  always use the vectorized fallback

Both paths share the same integer arithmetic: an interpolated value is
``(2*sum + n) // (2*n)`` over the ``n`` in-bounds same-color neighbors, which
is exactly round-half-up of ``sum / n``.  Outputs are bit-identical, so tests
and goldens hold regardless of backend.
"""

from __future__ import annotations

import os

import numpy as np

ENV_BACKEND = "EMISTRIP_BACKEND"


def _pick_backend() -> str:
    choice = os.environ.get(ENV_BACKEND, "auto").strip().lower()
    if choice not in {"auto", "numba", "numpy"}:
        raise ValueError(
            f"unsupported {ENV_BACKEND}={choice!r}; expected auto, numba, or numpy"
        )
    if choice == "numpy":
        return "numpy"
    try:
        import numba  # noqa: F401
    except ImportError:
        if choice == "numba":
            raise RuntimeError(f"{ENV_BACKEND}=numba but numba is not importable")
        return "numpy"
    return "numba"


_BACKEND = _pick_backend()


def active_backend() -> str:
    """Name of the kernel backend selected at import time."""
    return _BACKEND


def _demosaic_loop(samples, tile):
    # njit target; plain nested loops over sites and channels.
    h, w = samples.shape
    out = np.empty((h, w, 3), np.uint16)
    for r in range(h):
        for c in range(w):
            own = tile[r & 1, c & 1]
            for ch in range(3):
                if ch == own:
                    out[r, c, ch] = samples[r, c]
                    continue
                s = 0
                n = 0
                for dr in range(-1, 2):
                    rr = r + dr
                    if rr < 0 or rr >= h:
                        continue
                    for dc in range(-1, 2):
                        cc = c + dc
                        if cc < 0 or cc >= w:
                            continue
                        if tile[rr & 1, cc & 1] == ch:
                            s += samples[rr, cc]
                            n += 1
                if n > 0:
                    out[r, c, ch] = (2 * s + n) // (2 * n)
                else:
                    out[r, c, ch] = 0
    return out


def _box3(a: np.ndarray) -> np.ndarray:
    """Sum over the 3x3 window centered at each cell, zero outside the frame."""
    p = np.pad(a, 1)
    return (
        p[:-2, :-2] + p[:-2, 1:-1] + p[:-2, 2:]
        + p[1:-1, :-2] + p[1:-1, 1:-1] + p[1:-1, 2:]
        + p[2:, :-2] + p[2:, 1:-1] + p[2:, 2:]
    )


def demosaic_numpy(samples: np.ndarray, tile: np.ndarray) -> np.ndarray:
    """Vectorized bilinear demosaic; bit-identical to the numba loop."""
    h, w = samples.shape
    chan = tile[np.arange(h)[:, None] & 1, np.arange(w)[None, :] & 1]
    vals = samples.astype(np.int64)
    out = np.empty((h, w, 3), np.uint16)
    for ch in range(3):
        mask = chan == ch
        s = _box3(np.where(mask, vals, 0))
        n = _box3(mask.astype(np.int64))
        # center site never counts: its mask is 0 wherever channel ch is missing
        avg = np.where(n > 0, (2 * s + n) // (2 * np.maximum(n, 1)), 0)
        out[:, :, ch] = np.where(mask, vals, avg).astype(np.uint16)
    return out


if _BACKEND == "numba":
    from numba import njit

    demosaic_numba = njit(cache=True)(_demosaic_loop)
else:  # pragma: no cover - exercised under EMISTRIP_BACKEND=numpy
    def demosaic_numba(samples, tile):
        raise RuntimeError("numba backend unavailable (EMISTRIP_BACKEND=%s)" % _BACKEND)


def demosaic_samples(samples: np.ndarray, tile: np.ndarray) -> np.ndarray:
    """Dispatch the demosaic kernel to the active backend."""
    if _BACKEND == "numba":
        return demosaic_numba(samples, tile)
    return demosaic_numpy(samples, tile)
