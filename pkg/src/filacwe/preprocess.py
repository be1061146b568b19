"""Preprocessing: bright-patch inpainting, log enhancement and sharpening.

The inpainting scheme transports image smoothness (the Laplacian) along
isophotes into the hole,

    I <- I + dt * grad(L) . N,      L = laplacian(I),  N = isophote direction,

interleaved with a few steps of curvature-driven anisotropic diffusion,
``I_t = curvature(I) * |grad I|``, which keeps the transport stable and lets
flat (pre-filled) holes start moving at all.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage as ndi

from .core import as_image, as_mask
from .errors import DegenerateImageError, InvalidImageError

GRADIENT_EPS = 1e-12
DIFFUSION_EPS = 1e-8


@dataclass(frozen=True)
class InpaintConfig:
    """Parameters of white-patch detection and inpainting.

    ``dt`` and ``iterations`` drive the transport update; each transport
    step is followed by ``diffusion_steps`` anisotropic diffusion steps of
    size ``diffusion_dt`` (0 disables them).
    """

    dt: float = 0.1
    iterations: int = 500
    white_patch_percentile: float = 0.995
    dilation_radius: int = 2
    diffusion_steps: int = 2
    diffusion_dt: float = 0.2

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if not 0.0 < self.white_patch_percentile < 1.0:
            raise ValueError("white_patch_percentile must lie in (0, 1)")
        if self.dilation_radius < 0:
            raise ValueError("dilation_radius must be >= 0")
        if self.diffusion_steps < 0:
            raise ValueError("diffusion_steps must be >= 0")
        if not 0.0 <= self.diffusion_dt <= 0.25:
            raise ValueError("diffusion_dt must lie in [0, 0.25] for stability")


@dataclass(frozen=True)
class InpaintState:
    """One inpainting step laid out on the full grid.

    ``info_field`` is the Laplacian being propagated, ``direction_field``
    the unit isophote direction (shape ``(H, W, 2)``, components x then y)
    and ``update`` the transport speed ``grad(L) . N``.
    """

    image: np.ndarray
    omega: np.ndarray
    info_field: np.ndarray
    direction_field: np.ndarray
    update: np.ndarray


@dataclass(frozen=True)
class LogTransformParams:
    r: float
    i_max: float


def build_white_patch_mask(img, cfg: InpaintConfig = InpaintConfig(), disk=None) -> np.ndarray:
    """Region to inpaint: the brightest pixels, dilated.

    Pixels strictly brighter than the ``white_patch_percentile`` quantile
    are selected (quantile taken over ``disk`` pixels when a disk mask is
    given).  When the quantile equals the maximum, as for a constant image,
    the pixels at the maximum are selected instead.  The selection is
    dilated by a ``(2r+1) x (2r+1)`` square.
    """
    img = as_image(img, min_side=1)
    if disk is not None:
        disk = as_mask(disk, img.shape)
        values = img[disk]
        if values.size == 0:
            return np.zeros(img.shape, dtype=bool)
    else:
        values = img.ravel()
    level = np.quantile(values, cfg.white_patch_percentile)
    if level < values.max():
        mask = img > level
    else:
        mask = img >= level
    if disk is not None:
        mask &= disk
    if cfg.dilation_radius > 0:
        side = 2 * cfg.dilation_radius + 1
        mask = ndi.binary_dilation(mask, structure=np.ones((side, side), dtype=bool))
    return mask


def _interior(omega: np.ndarray) -> np.ndarray:
    out = omega.copy()
    out[0, :] = out[-1, :] = False
    out[:, 0] = out[:, -1] = False
    return out


def inpaint_state(img, omega) -> InpaintState:
    """Evaluate the transport terms of one inpainting step everywhere."""
    img = as_image(img)
    omega = as_mask(omega, img.shape)
    p = np.pad(img, 2, mode="edge")
    lap = np.zeros_like(p)
    lap[1:-1, 1:-1] = (p[:-2, 1:-1] + p[2:, 1:-1] + p[1:-1, :-2] + p[1:-1, 2:]
                       - 4.0 * p[1:-1, 1:-1])
    core = (slice(2, -2), slice(2, -2))
    dlx = lap[2:-2, 3:-1] - lap[core]
    dly = lap[3:-1, 2:-2] - lap[core]
    ix = (p[2:-2, 3:-1] - p[2:-2, 1:-3]) / 2.0
    iy = (p[3:-1, 2:-2] - p[1:-3, 2:-2]) / 2.0
    mag = np.hypot(ix, iy)
    flat = mag < GRADIENT_EPS
    safe = np.where(flat, 1.0, mag)
    nx = np.where(flat, 0.0, -iy / safe)
    ny = np.where(flat, 0.0, ix / safe)
    return InpaintState(
        image=img,
        omega=omega,
        info_field=lap[core].copy(),
        direction_field=np.stack([nx, ny], axis=-1),
        update=dlx * nx + dly * ny,
    )


class _Stencil:
    """Flat-index neighbourhoods of the hole pixels in a 2-pixel padded grid."""

    def __init__(self, omega: np.ndarray):
        h, w = omega.shape
        self.stride = w + 4
        ys, xs = np.nonzero(omega)
        self.shape = (h, w)
        self.idx = (ys + 2) * self.stride + (xs + 2)

    def pad(self, img):
        return np.pad(img, 2, mode="edge").ravel()

    def unpad(self, flat):
        h, w = self.shape
        return flat.reshape(h + 4, w + 4)[2:-2, 2:-2]

    def transport(self, f):
        s, p = self.stride, self.idx

        def lap(q):
            return f[q - 1] + f[q + 1] + f[q - s] + f[q + s] - 4.0 * f[q]

        l0 = lap(p)
        dlx = lap(p + 1) - l0
        dly = lap(p + s) - l0
        ix = (f[p + 1] - f[p - 1]) / 2.0
        iy = (f[p + s] - f[p - s]) / 2.0
        mag = np.hypot(ix, iy)
        flat = mag < GRADIENT_EPS
        mag[flat] = 1.0
        speed = (dly * ix - dlx * iy) / mag
        speed[flat] = 0.0
        return speed

    def diffusion(self, f):
        s, p = self.stride, self.idx
        c = f[p]
        ix = (f[p + 1] - f[p - 1]) / 2.0
        iy = (f[p + s] - f[p - s]) / 2.0
        ixx = f[p + 1] - 2.0 * c + f[p - 1]
        iyy = f[p + s] - 2.0 * c + f[p - s]
        ixy = (f[p + s + 1] - f[p + s - 1] - f[p - s + 1] + f[p - s - 1]) / 4.0
        num = ixx * iy * iy - 2.0 * ix * iy * ixy + iyy * ix * ix
        return num / (ix * ix + iy * iy + DIFFUSION_EPS)


def inpaint(img, omega, cfg: InpaintConfig = InpaintConfig()) -> np.ndarray:
    """Fill ``omega`` by isophote transport with interleaved diffusion.

    Only pixels of ``omega`` change; pixels on the outer 1-pixel frame are
    dropped from ``omega`` first.  Every update reads the previous
    iteration's full grid (Jacobi order), and values are clamped to
    [0, 255] after each iteration.
    """
    img = as_image(img)
    omega = _interior(as_mask(omega, img.shape))
    if not omega.any():
        return img
    st = _Stencil(omega)
    f = st.pad(img)
    p = st.idx
    for _ in range(cfg.iterations):
        f[p] = np.clip(f[p] + cfg.dt * st.transport(f), 0.0, 255.0)
        for _ in range(cfg.diffusion_steps):
            f[p] = np.clip(f[p] + cfg.diffusion_dt * st.diffusion(f), 0.0, 255.0)
    out = img.copy()
    out[omega] = st.unpad(f)[omega]
    return out


def log_transform(img) -> tuple[np.ndarray, LogTransformParams]:
    """Map ``v -> r * log(1 + v)`` with ``r = 255 / log(1 + max)``.

    Raises
    ------
    DegenerateImageError
        If the maximum intensity is 0 (or so small that ``r`` overflows),
        leaving ``r`` undefined.
    """
    img = as_image(img, min_side=1)
    if img.min() < 0:
        raise InvalidImageError("log_transform needs non-negative intensities")
    i_max = float(img.max())
    if i_max <= 0:
        raise DegenerateImageError("log_transform of an all-zero image is undefined")
    scale = np.log1p(i_max)
    with np.errstate(over="ignore"):
        r = 255.0 / scale
    if not np.isfinite(r):
        raise DegenerateImageError(f"maximum intensity {i_max!r} is too small to normalise")
    out = 255.0 * (np.log1p(img) / scale)
    out[img == i_max] = 255.0
    return out, LogTransformParams(r=float(r), i_max=i_max)


def sharpen(img, clip: bool = True) -> np.ndarray:
    """5-point sharpening ``5*I - (sum of the 4 neighbours)``.

    Out-of-range neighbours replicate the nearest border pixel.  With
    ``clip`` (the default) the result is clamped to [0, 255].
    """
    img = as_image(img)
    p = np.pad(img, 1, mode="edge")
    out = 5.0 * img - (p[:-2, 1:-1] + p[2:, 1:-1] + p[1:-1, :-2] + p[1:-1, 2:])
    if clip:
        np.clip(out, 0.0, 255.0, out=out)
    return out
