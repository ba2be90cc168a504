"""Heatmap export as binary PPM (P6) with a fixed diverging colormap.

PPM keeps the artifact free of imaging dependencies; bytes are a pure
function of the field values, so exports are reproducible bit-for-bit.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

# blue -> white -> red, linearly interpolated
_STOPS = np.array(
    [
        [0.0, 0.0, 0.55],
        [0.35, 0.45, 0.95],
        [1.0, 1.0, 1.0],
        [0.95, 0.45, 0.35],
        [0.55, 0.0, 0.0],
    ]
)


def colormap(v: np.ndarray) -> np.ndarray:
    """Map values in [0, 1] to uint8 RGB via the fixed stop table."""
    v = np.clip(v, 0.0, 1.0)
    pos = v * (len(_STOPS) - 1)
    lo = np.floor(pos).astype(int)
    hi = np.minimum(lo + 1, len(_STOPS) - 1)
    frac = (pos - lo)[..., None]
    rgb = _STOPS[lo] * (1.0 - frac) + _STOPS[hi] * frac
    return np.round(rgb * 255.0).astype(np.uint8)


def write_ppm(path: str | Path, field: np.ndarray) -> tuple[float, float]:
    """Write one real 2-d field as a P6 heatmap; returns (min, max).

    The linear color scale spans the field extrema; a constant field maps
    to the middle color.
    """
    a = np.asarray(field, dtype=np.float64)
    if a.ndim != 2:
        raise ValueError(f"heatmap expects a 2-d field, got shape {a.shape}")
    vmin, vmax = float(a.min()), float(a.max())
    norm = np.full_like(a, 0.5) if vmax == vmin else (a - vmin) / (vmax - vmin)
    rgb = colormap(norm)
    h, w = a.shape
    with open(path, "wb") as fh:
        fh.write(f"P6\n{w} {h}\n255\n".encode())
        fh.write(rgb.tobytes())
    return vmin, vmax
