"""Rasterization of designs and stress fields to 256x256 single-channel
images, plus standardization statistics.

Pixels outside the wire footprint are exactly zero.  One pixel is 1 um; a
branch of length L covers L pixels along its axis, matching the solver's
1 um cells one-to-one.  Where branch rectangles overlap (junction squares)
the branch with the lowest id wins.

Image arrays are indexed [y, x] (row = y).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .model import CANVAS_UM, HORIZONTAL, InterconnectTree, branch_rect
from .solver import StressField, YEAR_SECONDS

CURRENT = "current"
STRESS = "stress"
TIME = "time"


@dataclass
class FieldImage:
    data: np.ndarray          # float32, (256, 256)
    channel_kind: str         # CURRENT | STRESS
    design_id: int
    time_years: Optional[float] = None


class RasterError(ValueError):
    pass


def footprint_mask(tree: InterconnectTree) -> np.ndarray:
    mask = np.zeros((CANVAS_UM, CANVAS_UM), dtype=bool)
    for b in tree.branches:
        x0, x1, y0, y1 = branch_rect(tree, b)
        mask[y0:y1, x0:x1] = True
    return mask


def _paint_order(tree: InterconnectTree):
    return sorted(tree.branches, key=lambda b: b.id)


def rasterize_current(tree: InterconnectTree) -> FieldImage:
    img = np.zeros((CANVAS_UM, CANVAS_UM), dtype=np.float32)
    taken = np.zeros_like(img, dtype=bool)
    for b in _paint_order(tree):
        x0, x1, y0, y1 = branch_rect(tree, b)
        if x0 < 0 or y0 < 0 or x1 > CANVAS_UM or y1 > CANVAS_UM:
            raise RasterError(f"branch {b.id} footprint exceeds canvas")
        free = ~taken[y0:y1, x0:x1]
        img[y0:y1, x0:x1][free] = np.float32(b.j)
        taken[y0:y1, x0:x1] = True
    return FieldImage(data=img, channel_kind=CURRENT, design_id=tree.design_id)


def rasterize_stress(tree: InterconnectTree, field: StressField,
                     time_years: float) -> FieldImage:
    if field.dx != 1.0:
        raise RasterError("stress rasterization needs 1 um cells (dx=1)")
    ti = field.time_index(time_years * YEAR_SECONDS)
    by_pos = {bid: pos for pos, bid in enumerate(field.branch_ids)}
    img = np.zeros((CANVAS_UM, CANVAS_UM), dtype=np.float32)
    taken = np.zeros_like(img, dtype=bool)
    for b in _paint_order(tree):
        x0, x1, y0, y1 = branch_rect(tree, b)
        vals = field.branch_values[ti][by_pos[b.id]].astype(np.float32)
        if b.orientation == HORIZONTAL:
            if len(vals) != x1 - x0:
                raise RasterError(f"branch {b.id}: {len(vals)} cells vs "
                                  f"{x1 - x0} pixels")
            tile = np.broadcast_to(vals[np.newaxis, :], (y1 - y0, x1 - x0))
        else:
            if len(vals) != y1 - y0:
                raise RasterError(f"branch {b.id}: {len(vals)} cells vs "
                                  f"{y1 - y0} pixels")
            tile = np.broadcast_to(vals[:, np.newaxis], (y1 - y0, x1 - x0))
        free = ~taken[y0:y1, x0:x1]
        img[y0:y1, x0:x1][free] = tile[free]
        taken[y0:y1, x0:x1] = True
    return FieldImage(data=img, channel_kind=STRESS, design_id=tree.design_id,
                      time_years=time_years)


# --- standardization -------------------------------------------------------

@dataclass(frozen=True)
class NormStats:
    """Per-channel standardization statistics fit on the training split.

    Current/stress statistics use wire pixels only; the zero background is
    excluded so 'zero = no wire' survives normalization (normalized images
    are re-zeroed outside the footprint).
    """
    mean_current: float
    std_current: float
    mean_stress: float
    std_stress: float
    mean_time: float
    std_time: float

    def pair(self, kind: str) -> tuple[float, float]:
        if kind == CURRENT:
            return self.mean_current, self.std_current
        if kind == STRESS:
            return self.mean_stress, self.std_stress
        if kind == TIME:
            return self.mean_time, self.std_time
        raise ValueError(f"unknown channel kind {kind!r}")


class ZeroVarianceError(ValueError):
    pass


def standardize_fit(samples) -> NormStats:
    """Fit statistics over a nonempty training split of SamplePair-like
    records (attributes: current, stress, mask, time_years)."""
    samples = list(samples)
    if not samples:
        raise ValueError("empty training split")
    cur = np.concatenate([s.current[s.mask].astype(np.float64) for s in samples])
    st = np.concatenate([s.stress[s.mask].astype(np.float64) for s in samples])
    tv = np.array([s.time_years for s in samples], dtype=np.float64)
    out = {}
    for name, arr in (("current", cur), ("stress", st), ("time", tv)):
        mean = float(arr.mean())
        std = float(arr.std())
        if std <= 0:
            raise ZeroVarianceError(f"{name} channel has zero variance")
        out[f"mean_{name}"] = mean
        out[f"std_{name}"] = std
    return NormStats(**out)


def standardize_apply(values, stats: NormStats, kind: str,
                      mask: Optional[np.ndarray] = None):
    """(v - mean)/std; with a mask, off-footprint pixels stay exactly 0."""
    mean, std = stats.pair(kind)
    if np.isscalar(values):
        return (values - mean) / std
    norm = (np.asarray(values, dtype=np.float64) - mean) / std
    if mask is not None:
        norm = np.where(mask, norm, 0.0)
    return norm.astype(np.float32)


def standardize_invert(values, stats: NormStats, kind: str,
                       mask: Optional[np.ndarray] = None):
    mean, std = stats.pair(kind)
    if np.isscalar(values):
        return values * std + mean
    raw = np.asarray(values, dtype=np.float64) * std + mean
    if mask is not None:
        raw = np.where(mask, raw, 0.0)
    return raw.astype(np.float32)
