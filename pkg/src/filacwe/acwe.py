"""Chan-Vese active contours without edges.

The contour is the zero level of ``phi``; the region ``phi > 0`` is the
inside.  The energy being minimised is

    mu * Length + nu * Area + lambda1 * sum_inside (I - c1)^2
                            + lambda2 * sum_outside (I - c2)^2

and the explicit gradient-descent update is

    phi <- phi + dt * delta_eps(phi) * (mu * kappa - nu
                                        - lambda1 (I - c1)^2 + lambda2 (I - c2)^2)

with the arctan-regularized Heaviside/delta pair.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Literal

import numpy as np
from numba import njit

from .core import as_image, as_mask, check_same_shape
from .errors import EvolutionDivergedError, InvalidImageError

CURVATURE_EPS = 1e-8
PHI_LIMIT = 1e6

InitScheme = Literal["checkerboard", "circle"]


@dataclass(frozen=True)
class AcweConfig:
    mu: float = 0.003
    nu: float = 0.0
    lambda1: float = 1.000001
    lambda2: float = 0.1
    dt: float = 0.5
    epsilon: float = 1.0
    max_iters: int = 500
    tol: float = 1e-4
    init: InitScheme = "checkerboard"
    normalize_input: bool = True

    def __post_init__(self):
        if self.mu < 0:
            raise ValueError("mu must be >= 0")
        if not (self.lambda1 > 0 and self.lambda2 > 0):
            raise ValueError("lambda1 and lambda2 must be positive")
        if not (self.dt > 0 and self.epsilon > 0):
            raise ValueError("dt and epsilon must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.tol < 0:
            raise ValueError("tol must be >= 0")
        if self.init not in ("checkerboard", "circle"):
            raise ValueError(f"unknown init scheme {self.init!r}")


@dataclass
class AcweResult:
    mask: np.ndarray
    c1: float
    c2: float
    iterations_run: int
    energy_trace: list[float]
    converged: bool
    delta_trace: list[float] = field(default_factory=list)
    phi: np.ndarray | None = None


def heaviside(phi, epsilon: float) -> np.ndarray:
    return 0.5 * (1.0 + (2.0 / np.pi) * np.arctan(phi / epsilon))


def dirac(phi, epsilon: float) -> np.ndarray:
    return epsilon / (np.pi * (epsilon * epsilon + phi * phi))


def normalize(img) -> np.ndarray:
    """Affine map of ``img`` onto [0, 1]; a constant image maps to zeros."""
    img = np.asarray(img, dtype=np.float64)
    lo, hi = img.min(), img.max()
    if hi <= lo:
        return np.zeros_like(img)
    return (img - lo) / (hi - lo)


def central_gradient(f) -> tuple[np.ndarray, np.ndarray]:
    """Central differences ``(d/dx, d/dy)`` with replicated borders."""
    p = np.pad(f, 1, mode="edge")
    gx = (p[1:-1, 2:] - p[1:-1, :-2]) / 2.0
    gy = (p[2:, 1:-1] - p[:-2, 1:-1]) / 2.0
    return gx, gy


def curvature(phi) -> np.ndarray:
    """``div(grad phi / |grad phi|)`` by central differences."""
    gx, gy = central_gradient(phi)
    norm = np.sqrt(gx * gx + gy * gy) + CURVATURE_EPS
    nx_x, _ = central_gradient(gx / norm)
    _, ny_y = central_gradient(gy / norm)
    return nx_x + ny_y


# ---------------------------------------------------------------------------
# compiled per-iteration kernels used by evolve(); the numpy functions above
# are the reference definitions and the tests hold the kernels to them.

@njit(cache=True, nogil=True)
def _k_means(img, phi):
    h, w = img.shape
    n_in = 0
    s_in = 0.0
    s_all = 0.0
    for y in range(h):
        for x in range(w):
            v = img[y, x]
            s_all += v
            if phi[y, x] > 0:
                n_in += 1
                s_in += v
    n = h * w
    if n_in == 0 or n_in == n:
        g = s_all / n
        return g, g
    return s_in / n_in, (s_all - s_in) / (n - n_in)


@njit(cache=True, nogil=True)
def _k_energy(img, phi, c1, c2, eps, mu, nu, lam1, lam2):
    h, w = img.shape
    hv = np.empty((h, w))
    area = 0.0
    fit_in = 0.0
    fit_out = 0.0
    for y in range(h):
        for x in range(w):
            p = phi[y, x]
            hv[y, x] = 0.5 * (1.0 + (2.0 / math.pi) * math.atan(p / eps))
            area += hv[y, x]
            v = img[y, x]
            if p > 0:
                fit_in += (v - c1) * (v - c1)
            else:
                fit_out += (v - c2) * (v - c2)
    length = 0.0
    if mu != 0.0:
        for y in range(h):
            ym, yp = max(y - 1, 0), min(y + 1, h - 1)
            for x in range(w):
                xm, xp = max(x - 1, 0), min(x + 1, w - 1)
                gx = (hv[y, xp] - hv[y, xm]) / 2.0
                gy = (hv[yp, x] - hv[ym, x]) / 2.0
                length += math.sqrt(gx * gx + gy * gy)
    return mu * length + nu * area + lam1 * fit_in + lam2 * fit_out


@njit(cache=True, nogil=True)
def _k_step(img, phi, c1, c2, eps, mu, nu, lam1, lam2, dt, outside, out):
    """Write the updated level set into ``out``; return (sum |change|, finite)."""
    h, w = img.shape
    nx = np.empty((h, w))
    ny = np.empty((h, w))
    if mu != 0.0:
        for y in range(h):
            ym, yp = max(y - 1, 0), min(y + 1, h - 1)
            for x in range(w):
                xm, xp = max(x - 1, 0), min(x + 1, w - 1)
                gx = (phi[y, xp] - phi[y, xm]) / 2.0
                gy = (phi[yp, x] - phi[ym, x]) / 2.0
                norm = math.sqrt(gx * gx + gy * gy) + CURVATURE_EPS
                nx[y, x] = gx / norm
                ny[y, x] = gy / norm
    total = 0.0
    finite = True
    for y in range(h):
        ym, yp = max(y - 1, 0), min(y + 1, h - 1)
        for x in range(w):
            v = img[y, x]
            force = lam2 * (v - c2) ** 2 - lam1 * (v - c1) ** 2 - nu
            if mu != 0.0:
                xm, xp = max(x - 1, 0), min(x + 1, w - 1)
                kappa = (nx[y, xp] - nx[y, xm]) / 2.0 + (ny[yp, x] - ny[ym, x]) / 2.0
                force += mu * kappa
            p = phi[y, x]
            new = p + dt * (eps / (math.pi * (eps * eps + p * p))) * force
            if new > PHI_LIMIT:
                new = PHI_LIMIT
            elif new < -PHI_LIMIT:
                new = -PHI_LIMIT
            if outside[y, x] and new > -1.0:
                new = -1.0
            if not math.isfinite(new):
                finite = False
            out[y, x] = new
            total += abs(new - p)
    return total, finite


def init_level_set(width: int, height: int, scheme: InitScheme = "checkerboard",
                   roi=None) -> np.ndarray:
    """Initial level set of shape ``(height, width)``.

    ``checkerboard``: ``sin(pi x / 5) * sin(pi y / 5)``.
    ``circle``: signed distance to a centred circle of radius
    ``min(width, height) / 3``, positive inside.
    Outside ``roi`` (if given) phi is forced to -1.
    """
    if width < 3 or height < 3:
        raise InvalidImageError(f"level set needs at least 3x3, got {width}x{height}")
    yy, xx = np.indices((height, width), dtype=np.float64)
    if scheme == "checkerboard":
        phi = np.sin(np.pi * xx / 5.0) * np.sin(np.pi * yy / 5.0)
    elif scheme == "circle":
        radius = min(width, height) / 3.0
        cx, cy = (width - 1) / 2.0, (height - 1) / 2.0
        phi = radius - np.hypot(xx - cx, yy - cy)
    else:
        raise ValueError(f"unknown init scheme {scheme!r}")
    if roi is not None:
        roi = as_mask(roi, phi.shape)
        phi[~roi] = -1.0
    return phi


def region_means(img, phi) -> tuple[float, float]:
    """Mean of ``img`` over ``phi > 0`` and over ``phi <= 0``.

    An empty region takes the global mean.
    """
    img = np.asarray(img, dtype=np.float64)
    check_same_shape(img, phi)
    inside = np.asarray(phi) > 0
    n_in = int(np.count_nonzero(inside))
    total = img.sum()
    if n_in == 0 or n_in == img.size:
        g = total / img.size
        return float(g), float(g)
    s_in = img[inside].sum()
    return float(s_in / n_in), float((total - s_in) / (img.size - n_in))


def energy(img, phi, cfg: AcweConfig = AcweConfig()) -> float:
    """Chan-Vese energy of the partition given by ``phi``.

    Length is ``sum |grad H_eps(phi)|`` and Area ``sum H_eps(phi)``;
    the fidelity sums use the sharp partition ``phi > 0``.
    """
    img = np.asarray(img, dtype=np.float64)
    phi = np.asarray(phi, dtype=np.float64)
    check_same_shape(img, phi)
    c1, c2 = region_means(img, phi)
    h = heaviside(phi, cfg.epsilon)
    hx, hy = central_gradient(h)
    length = np.sqrt(hx * hx + hy * hy).sum()
    area = h.sum()
    inside = phi > 0
    fit_in = ((img[inside] - c1) ** 2).sum()
    fit_out = ((img[~inside] - c2) ** 2).sum()
    return float(cfg.mu * length + cfg.nu * area
                 + cfg.lambda1 * fit_in + cfg.lambda2 * fit_out)


def evolve(img, cfg: AcweConfig = AcweConfig(), roi=None,
           callback: Callable[[int, np.ndarray, float, float], None] | None = None
           ) -> AcweResult:
    """Evolve the level set until the mean |change| drops below ``cfg.tol``.

    ``callback(iteration, phi, c1, c2)``, if given, is called before each
    update with the level set and the region means used for it.

    Raises
    ------
    EvolutionDivergedError
        If the update produces non-finite values.
    """
    img = as_image(img)
    if cfg.normalize_input:
        img = normalize(img)
    h, w = img.shape
    if roi is not None:
        roi = as_mask(roi, img.shape)
    phi = init_level_set(w, h, cfg.init, roi)
    outside = np.zeros(img.shape, dtype=np.bool_) if roi is None else ~roi
    params = (cfg.epsilon, cfg.mu, cfg.nu, cfg.lambda1, cfg.lambda2)

    c1, c2 = _k_means(img, phi)
    energies = [float(_k_energy(img, phi, c1, c2, *params))]
    deltas: list[float] = []
    converged = False
    new = np.empty_like(phi)
    it = 0
    for it in range(1, cfg.max_iters + 1):
        if callback is not None:
            callback(it, phi, c1, c2)
        total, finite = _k_step(img, phi, c1, c2, *params, cfg.dt, outside, new)
        if not finite:
            raise EvolutionDivergedError(
                f"non-finite level set at iteration {it}", it, phi.copy(), c1, c2)
        phi, new = new, phi
        delta = total / phi.size
        c1, c2 = _k_means(img, phi)
        energies.append(float(_k_energy(img, phi, c1, c2, *params)))
        deltas.append(delta)
        if delta < cfg.tol:
            converged = True
            break

    return AcweResult(
        mask=phi > 0,
        c1=c1,
        c2=c2,
        iterations_run=it,
        energy_trace=energies,
        converged=converged,
        delta_trace=deltas,
        phi=phi.copy(),
    )


def filament_mask(result: AcweResult, img=None) -> np.ndarray:
    """The darker of the two regions; ties keep the inside."""
    if img is not None:
        check_same_shape(result.mask, img)
    if result.c1 <= result.c2:
        return result.mask.copy()
    return ~result.mask
