"""Classical comparison segmenters: Otsu thresholding and 1-D k-means.

Both label the *dark* class as the filament candidate.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import as_image, as_mask
from .errors import DegenerateImageError


def intensity_levels(img) -> np.ndarray:
    """Integer levels 0..255, rounding half up."""
    return np.clip(np.floor(np.asarray(img, dtype=np.float64) + 0.5), 0, 255).astype(np.int64)


def histogram256(img, roi=None) -> np.ndarray:
    levels = intensity_levels(img)
    if roi is not None:
        levels = levels[as_mask(roi, levels.shape)]
    return np.bincount(levels.ravel(), minlength=256)


def otsu_threshold(img, roi=None) -> tuple[int, np.ndarray]:
    """Otsu's threshold over the 256-level histogram.

    The class below the threshold is ``level <= t``.  The between-class
    variance is compared in exact integer arithmetic, so ties resolve to
    the smallest ``t`` deterministically.

    Returns
    -------
    threshold : int
    mask : ndarray of bool
        Pixels (within ``roi``) at or below the threshold.
    """
    img = as_image(img, min_side=1)
    levels = intensity_levels(img)
    hist = histogram256(img, roi)
    if np.count_nonzero(hist) < 2:
        raise DegenerateImageError("degenerate histogram: fewer than two intensity levels")
    counts = [int(c) for c in hist]
    n_total = sum(counts)
    s_total = sum(k * c for k, c in enumerate(counts))

    # sigma_b^2 = (N*S0 - n0*S)^2 / (N^2 n0 n1); the N^2 is common to all t.
    best_t, best_num, best_den = -1, 0, 1
    n0 = s0 = 0
    for t in range(255):
        n0 += counts[t]
        s0 += t * counts[t]
        n1 = n_total - n0
        if n0 == 0 or n1 == 0:
            continue
        num = (n_total * s0 - n0 * s_total) ** 2
        den = n0 * n1
        if best_t < 0 or num * best_den > best_num * den:
            best_t, best_num, best_den = t, num, den
    mask = levels <= best_t
    if roi is not None:
        mask &= as_mask(roi, img.shape)
    return best_t, mask


@dataclass(frozen=True)
class KMeansConfig:
    k: int = 2
    max_iters: int = 100
    tol: float = 1e-6
    seed: int = 0  # used to re-seed clusters that become empty

    def __post_init__(self):
        if self.k < 2:
            raise ValueError("k must be >= 2")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")


@dataclass
class KMeansResult:
    centroids: np.ndarray
    assignment: np.ndarray
    objective_trace: list[float]
    iterations: int


def _assign(values, centroids):
    # argmin takes the first (lowest-index) centroid on ties
    return np.argmin(np.abs(values[:, None] - centroids[None, :]), axis=1)


def _objective(values, centroids, assignment) -> float:
    return float(((values - centroids[assignment]) ** 2).sum())


def kmeans_1d(values, cfg: KMeansConfig = KMeansConfig()) -> KMeansResult:
    """Lloyd's algorithm on scalar data with quantile initialisation.

    Centroids start at the ``(i + 0.5) / k`` quantiles and are returned in
    ascending order.  ``objective_trace`` holds the within-cluster sum of
    squares after every assignment and every update step.
    """
    values = np.asarray(values, dtype=np.float64).ravel()
    if np.unique(values).size < cfg.k:
        raise DegenerateImageError(f"need at least {cfg.k} distinct values for k-means")
    rng = np.random.default_rng(cfg.seed)
    centroids = np.quantile(values, (np.arange(cfg.k) + 0.5) / cfg.k)
    assignment = _assign(values, centroids)
    trace = [_objective(values, centroids, assignment)]
    it = 0
    for it in range(1, cfg.max_iters + 1):
        updated = centroids.copy()
        for j in range(cfg.k):
            members = values[assignment == j]
            if members.size:
                updated[j] = members.mean()
            else:
                updated[j] = values[rng.integers(values.size)]
        trace.append(_objective(values, updated, assignment))
        shift = float(np.max(np.abs(updated - centroids)))
        centroids = updated
        assignment = _assign(values, centroids)
        trace.append(_objective(values, centroids, assignment))
        if shift < cfg.tol:
            break
    order = np.argsort(centroids, kind="stable")
    rank = np.empty_like(order)
    rank[order] = np.arange(cfg.k)
    return KMeansResult(centroids[order], rank[assignment], trace, it)


def kmeans_segment(img, cfg: KMeansConfig = KMeansConfig(), roi=None) -> np.ndarray:
    """Pixels (within ``roi``) assigned to the darkest k-means cluster."""
    img = as_image(img, min_side=1)
    region = np.ones(img.shape, dtype=bool) if roi is None else as_mask(roi, img.shape)
    result = kmeans_1d(img[region], cfg)
    mask = np.zeros(img.shape, dtype=bool)
    mask[region] = result.assignment == 0
    return mask
