"""Synthetic full-disk images with exact filament ground truth.

Randomness comes from ``numpy.random.Generator(PCG64(seed))``; fixtures are
stable for a given numpy release line.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage as ndi
from scipy.spatial import cKDTree

from .core import EIGHT_CONNECTED, save_image, save_mask

MAX_PLACEMENT_TRIES = 400
FEATURE_GAP = 3  # min pixel gap between distinct features


@dataclass(frozen=True)
class SynthSpec:
    """Recipe for :func:`generate`."""

    size: int = 512
    disk_radius_fraction: float = 0.45
    background_level: float = 10.0
    disk_level: float = 180.0
    filament_level: float = 60.0
    patch_level: float = 250.0
    n_filaments: int = 4
    n_patches: int = 2
    noise_sigma: float = 3.0
    seed: int = 0

    def validate(self) -> None:
        if self.size < 64:
            raise ValueError("size must be >= 64")
        if not 0.0 < self.disk_radius_fraction < 0.5:
            raise ValueError("disk_radius_fraction must lie in (0, 0.5)")
        if not self.filament_level < self.disk_level < self.patch_level:
            raise ValueError("need filament_level < disk_level < patch_level")
        if self.n_filaments < 0 or self.n_patches < 0 or self.noise_sigma < 0:
            raise ValueError("counts and noise_sigma must be non-negative")

    @classmethod
    def from_dict(cls, d: dict) -> "SynthSpec":
        return cls(**d)


@dataclass
class SynthCase:
    image: np.ndarray
    truth: np.ndarray
    disk: np.ndarray
    patches: np.ndarray
    spec: SynthSpec


def _stroke(rng, shape, center, radius, size):
    """One random-walk polyline rasterised with 2-4 px thickness."""
    thickness = rng.integers(2, 5)
    n_steps = int(rng.integers(max(8, int(0.15 * radius)), max(12, int(0.45 * radius))))
    rho = radius * np.sqrt(rng.uniform(0.0, 0.7))
    ang = rng.uniform(0, 2 * np.pi)
    pt = np.array([center[0] + rho * np.cos(ang), center[1] + rho * np.sin(ang)])
    heading = rng.uniform(0, 2 * np.pi)
    points = [pt.copy()]
    for _ in range(n_steps * 4):
        heading += rng.normal(0.0, 0.06)
        pt = pt + 0.25 * np.array([np.cos(heading), np.sin(heading)])
        points.append(pt.copy())
    points = np.array(points)
    half = thickness / 2.0
    x0 = max(int(np.floor(points[:, 0].min() - half)) - 1, 0)
    x1 = min(int(np.ceil(points[:, 0].max() + half)) + 2, shape[1])
    y0 = max(int(np.floor(points[:, 1].min() - half)) - 1, 0)
    y1 = min(int(np.ceil(points[:, 1].max() + half)) + 2, shape[0])
    yy, xx = np.mgrid[y0:y1, x0:x1]
    dist, _ = cKDTree(points).query(np.column_stack([xx.ravel(), yy.ravel()]))
    out = np.zeros(shape, dtype=bool)
    out[y0:y1, x0:x1] = (dist <= half).reshape(yy.shape)
    return out


def _blob(rng, shape, center, radius, size):
    r = rng.uniform(0.012, 0.02) * size
    r = max(r, 1.5)
    rho = (radius - 2 * r) * np.sqrt(rng.uniform(0.0, 0.8))
    ang = rng.uniform(0, 2 * np.pi)
    bx, by = center[0] + rho * np.cos(ang), center[1] + rho * np.sin(ang)
    yy, xx = np.indices(shape)
    return (xx - bx) ** 2 + (yy - by) ** 2 <= r * r


def _place(rng, draw, n, occupied, inner, shape, center, radius, size, what):
    features = np.zeros(shape, dtype=bool)
    gap = np.ones((2 * FEATURE_GAP + 1,) * 2, dtype=bool)
    for _ in range(n):
        for _ in range(MAX_PLACEMENT_TRIES):
            cand = draw(rng, shape, center, radius, size)
            if not cand.any() or (cand & ~inner).any():
                continue
            if (ndi.binary_dilation(cand, structure=gap) & occupied).any():
                continue
            features |= cand
            occupied |= cand
            break
        else:
            raise ValueError(f"could not place {n} non-overlapping {what}; spec is too crowded")
    return features


def generate(spec: SynthSpec) -> SynthCase:
    """Render a deterministic synthetic full-disk image."""
    spec.validate()
    rng = np.random.Generator(np.random.PCG64(spec.seed))
    n = spec.size
    shape = (n, n)
    center = ((n - 1) / 2.0, (n - 1) / 2.0)
    radius = spec.disk_radius_fraction * n
    yy, xx = np.indices(shape, dtype=np.float64)
    rho = np.hypot(xx - center[0], yy - center[1])
    disk = rho <= radius
    limb_margin = max(4.0, 0.03 * radius)
    inner = rho <= radius - limb_margin

    occupied = np.zeros(shape, dtype=bool)
    truth = _place(rng, _stroke, spec.n_filaments, occupied, inner, shape, center,
                   radius, n, "filaments")
    patches = _place(rng, _blob, spec.n_patches, occupied, inner, shape, center,
                     radius, n, "patches")

    img = np.full(shape, float(spec.background_level))
    img[disk] = spec.disk_level
    img[truth] = spec.filament_level
    img[patches] = spec.patch_level
    if spec.noise_sigma > 0:
        img = img + rng.normal(0.0, spec.noise_sigma, shape)
    img = np.clip(img, 0.0, 255.0)
    return SynthCase(image=img, truth=truth, disk=disk, patches=patches, spec=spec)


def two_region_case(size: int = 128, radius_fraction: float = 0.3,
                    inside_level: float = 0.2 * 255, outside_level: float = 0.8 * 255,
                    noise_sigma: float = 3.0, seed: int = 0,
                    ) -> tuple[np.ndarray, np.ndarray]:
    """A noisy disk on a flat background; returns ``(image, disk_mask)``.

    The disk centre is jittered by up to 10% of ``size`` from the middle.
    """
    rng = np.random.Generator(np.random.PCG64(seed))
    cx, cy = (size - 1) / 2.0 + rng.uniform(-0.1, 0.1, 2) * size
    yy, xx = np.indices((size, size), dtype=np.float64)
    disk = np.hypot(xx - cx, yy - cy) <= radius_fraction * size
    img = np.where(disk, inside_level, outside_level)
    if noise_sigma > 0:
        img = img + rng.normal(0.0, noise_sigma, img.shape)
    return np.clip(img, 0.0, 255.0), disk


def count_components(mask) -> int:
    return int(ndi.label(mask, structure=EIGHT_CONNECTED)[1])


def write_case(case: SynthCase, out_dir) -> None:
    """Write image.png, truth.pgm, disk.pgm, patches.pgm and spec.json."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_image(case.image, out / "image.png")
    save_mask(case.truth, out / "truth.pgm")
    save_mask(case.disk, out / "disk.pgm")
    save_mask(case.patches, out / "patches.pgm")
    (out / "spec.json").write_text(json.dumps(asdict(case.spec), indent=2, sort_keys=True) + "\n")
