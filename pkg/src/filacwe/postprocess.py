"""Connected-component labelling and area filtering of segmentation masks."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage as ndi

from .core import EIGHT_CONNECTED, as_mask


@dataclass(frozen=True)
class ComponentLabels:
    labels: np.ndarray
    num_components: int
    areas: np.ndarray  # areas[k - 1] is the pixel count of label k

    @property
    def width(self) -> int:
        return self.labels.shape[1]

    @property
    def height(self) -> int:
        return self.labels.shape[0]


@dataclass(frozen=True)
class PostprocessConfig:
    min_area: int = 50

    def __post_init__(self):
        if self.min_area < 0:
            raise ValueError("min_area must be >= 0")


def label_components(mask) -> ComponentLabels:
    """8-connected labelling, labels numbered by first pixel in row-major order."""
    mask = as_mask(mask)
    raw, n = ndi.label(mask, structure=EIGHT_CONNECTED)
    if n == 0:
        return ComponentLabels(raw.astype(np.int64), 0, np.zeros(0, dtype=np.int64))
    flat = raw.ravel()
    found, first = np.unique(flat, return_index=True)
    keep = found > 0  # drop background, if present
    found, first = found[keep], first[keep]
    order = found[np.argsort(first, kind="stable")]
    remap = np.zeros(n + 1, dtype=np.int64)
    remap[order] = np.arange(1, n + 1)
    labels = remap[raw]
    areas = np.bincount(labels.ravel(), minlength=n + 1)[1:]
    return ComponentLabels(labels, int(n), areas)


def filter_by_area(mask, cfg: PostprocessConfig = PostprocessConfig()) -> np.ndarray:
    """Keep only components with at least ``cfg.min_area`` pixels."""
    mask = as_mask(mask)
    if cfg.min_area == 0:
        return mask
    comp = label_components(mask)
    keep = np.zeros(comp.num_components + 1, dtype=bool)
    keep[1:] = comp.areas >= cfg.min_area
    return keep[comp.labels]


def component_report(mask) -> list[dict]:
    """Label, area, bounding box and centroid of every component."""
    comp = label_components(mask)
    rows = []
    slices = ndi.find_objects(comp.labels)
    for k, sl in enumerate(slices, start=1):
        ys, xs = np.nonzero(comp.labels[sl] == k)
        rows.append({
            "label": k,
            "area": int(comp.areas[k - 1]),
            "x_min": sl[1].start,
            "y_min": sl[0].start,
            "x_max": sl[1].stop - 1,
            "y_max": sl[0].stop - 1,
            "centroid_x": float(xs.mean() + sl[1].start),
            "centroid_y": float(ys.mean() + sl[0].start),
        })
    return rows
