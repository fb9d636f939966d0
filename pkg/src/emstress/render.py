"""Heatmap rendering of field images for visual inspection.

Output is a deterministic 8-bit PNG (grayscale by default, or a small fixed
palette) plus a sidecar text file recording the (min, max) used for the
mapping, so pixel values can be de-quantized.
"""

from __future__ import annotations

import numpy as np
from PIL import Image

# compact fixed palette: black -> blue -> cyan -> yellow -> red anchors
_PALETTE_ANCHORS = np.array([
    [0, 0, 0],
    [32, 32, 160],
    [0, 192, 192],
    [240, 220, 64],
    [220, 32, 32],
], dtype=np.float64)


def _quantize(data: np.ndarray) -> tuple[np.ndarray, float, float]:
    lo = float(np.min(data))
    hi = float(np.max(data))
    if hi > lo:
        q = np.clip((data.astype(np.float64) - lo) / (hi - lo) * 255.0, 0, 255)
    else:
        q = np.zeros_like(data, dtype=np.float64)
    return q.astype(np.uint8), lo, hi


def render_field(data: np.ndarray, png_path, palette: bool = False) -> tuple[float, float]:
    """Write a PNG of the field; returns the (min, max) mapped to the
    palette endpoints and records them in `<png_path>.minmax.txt`."""
    q, lo, hi = _quantize(np.asarray(data))
    if palette:
        xs = np.linspace(0, 255, len(_PALETTE_ANCHORS))
        lut = np.stack([np.interp(np.arange(256), xs, _PALETTE_ANCHORS[:, c])
                        for c in range(3)], axis=1).astype(np.uint8)
        img = Image.fromarray(lut[q], mode="RGB")
    else:
        img = Image.fromarray(q, mode="L")
    img.save(png_path, format="PNG")
    with open(str(png_path) + ".minmax.txt", "w") as f:
        f.write(f"min = {lo!r}\nmax = {hi!r}\n")
    return lo, hi
