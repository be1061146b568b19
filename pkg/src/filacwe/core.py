"""Image and mask value types, raster I/O, and solar-disk detection.

Images are plain ``numpy`` arrays: a *gray image* is a 2-D ``float64`` array
of intensities on the nominal [0, 255] scale, indexed ``img[y, x]``; a *mask*
is a 2-D ``bool`` array of the same layout.  :func:`as_image` and
:func:`as_mask` validate and copy arbitrary array-likes into that form.
"""
from __future__ import annotations

import os
import re
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError
from scipy import ndimage as ndi

from .errors import (
    DimensionMismatchError,
    EmptyImageError,
    ImageReadError,
    ImageWriteError,
    InvalidImageError,
    NoDiskFoundError,
    UnsupportedFormatError,
)

MIN_SIDE = 3
EIGHT_CONNECTED = np.ones((3, 3), dtype=bool)


def as_image(data, *, min_side: int = MIN_SIDE) -> np.ndarray:
    """Return a validated ``float64`` copy of ``data``.

    Raises
    ------
    InvalidImageError
        If ``data`` is not 2-D, is smaller than ``min_side`` in either
        dimension, or contains NaN/Inf.
    """
    arr = np.array(data, dtype=np.float64, copy=True)
    if arr.ndim != 2:
        raise InvalidImageError(f"expected a 2-D image, got shape {arr.shape}")
    if arr.shape[0] < min_side or arr.shape[1] < min_side:
        raise InvalidImageError(
            f"image is {arr.shape[1]}x{arr.shape[0]}, need at least {min_side}x{min_side}"
        )
    if not np.all(np.isfinite(arr)):
        raise InvalidImageError("image contains non-finite values")
    return arr


def as_mask(data, shape: tuple[int, int] | None = None) -> np.ndarray:
    """Return a ``bool`` copy of ``data``, optionally checking its shape."""
    arr = np.array(data, dtype=bool, copy=True)
    if arr.ndim != 2:
        raise InvalidImageError(f"expected a 2-D mask, got shape {arr.shape}")
    if shape is not None:
        check_same_shape(arr.shape, shape)
    return arr


def check_same_shape(a, b) -> None:
    sa = a if isinstance(a, tuple) else np.shape(a)
    sb = b if isinstance(b, tuple) else np.shape(b)
    if tuple(sa) != tuple(sb):
        raise DimensionMismatchError(f"shape mismatch: {tuple(sa)} vs {tuple(sb)}")


# ---------------------------------------------------------------------------
# raster I/O

_PGM_TOKEN = re.compile(rb"(?:\s|#[^\n]*\n?)*(\S+)")


def _read_pgm(raw: bytes) -> np.ndarray:
    magic = raw[:2]
    pos = 2
    header = []
    while len(header) < 3:
        m = _PGM_TOKEN.match(raw, pos)
        if m is None:
            raise ImageReadError("truncated PGM header")
        header.append(m.group(1))
        pos = m.end()
    try:
        width, height, maxval = (int(t) for t in header)
    except ValueError as exc:
        raise ImageReadError(f"malformed PGM header: {header!r}") from exc
    if width == 0 or height == 0:
        raise EmptyImageError("zero-sized image")
    if not 0 < maxval < 65536:
        raise ImageReadError(f"invalid PGM maxval {maxval}")
    n = width * height
    if magic == b"P5":
        pos += 1  # single whitespace byte after maxval
        dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
        body = raw[pos:pos + n * dtype.itemsize]
        if len(body) < n * dtype.itemsize:
            raise ImageReadError("truncated PGM pixel data")
        values = np.frombuffer(body, dtype=dtype).astype(np.float64)
    else:
        tokens = raw[pos:].split()
        if len(tokens) < n:
            raise ImageReadError("truncated PGM pixel data")
        values = np.array([int(t) for t in tokens[:n]], dtype=np.float64)
    values = values.reshape(height, width)
    if maxval > 255:
        values *= 255.0 / maxval
    return values


def _read_pillow(path: Path) -> np.ndarray:
    try:
        with Image.open(path) as im:
            im.load()
            mode = im.mode
            if im.width == 0 or im.height == 0:
                raise EmptyImageError("zero-sized image")
            if mode == "L":
                return np.asarray(im, dtype=np.float64)
            if mode == "1":
                return np.asarray(im, dtype=np.float64) * 255.0
            if mode in ("I;16", "I;16B", "I;16L", "I"):
                arr = np.asarray(im).astype(np.float64)
                return arr * (255.0 / 65535.0)
            raise UnsupportedFormatError(f"unsupported image mode {mode!r} (grayscale only)")
    except (UnidentifiedImageError, SyntaxError) as exc:
        raise UnsupportedFormatError(f"{path}: unrecognised image format") from exc


def load_image(path) -> np.ndarray:
    """Read a grayscale PGM (P2/P5) or PNG file as a float image in [0, 255].

    Sources deeper than 8 bits are rescaled to the 255 scale (``255/65535``
    for 16-bit data).
    """
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise ImageReadError(f"cannot read {path}: {exc}") from exc
    if raw[:2] in (b"P2", b"P5"):
        img = _read_pgm(raw)
    elif raw[:8] == b"\x89PNG\r\n\x1a\n":
        img = _read_pillow(path)
    else:
        raise UnsupportedFormatError(f"{path}: only PGM (P2/P5) and PNG are supported")
    if img.size == 0:
        raise EmptyImageError("zero-sized image")
    return img


def _atomic_write(path: Path, write) -> None:
    """Write via a temporary sibling file then rename into place."""
    path = Path(path)
    try:
        fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
    except OSError as exc:
        raise ImageWriteError(f"cannot write {path}: {exc}") from exc
    try:
        with os.fdopen(fd, "wb") as fh:
            write(fh)
        os.replace(tmp, path)
    except Exception as exc:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        if isinstance(exc, OSError):
            raise ImageWriteError(f"cannot write {path}: {exc}") from exc
        raise


def _quantize(img) -> np.ndarray:
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim != 2:
        raise InvalidImageError(f"expected a 2-D image, got shape {arr.shape}")
    return np.floor(np.clip(np.nan_to_num(arr), 0.0, 255.0) + 0.5).astype(np.uint8)


def save_image(img, path) -> None:
    """Write ``img`` as 8-bit PGM (``.pgm``) or PNG (anything else).

    Values are clamped to [0, 255] and rounded half-up, so a round trip
    through :func:`load_image` is exact to within 0.5.
    """
    path = Path(path)
    data = _quantize(img)
    if path.suffix.lower() == ".pgm":
        def write(fh):
            fh.write(b"P5\n%d %d\n255\n" % (data.shape[1], data.shape[0]))
            fh.write(data.tobytes())
    else:
        def write(fh):
            Image.fromarray(data, mode="L").save(fh, format="PNG")
    _atomic_write(path, write)


def save_mask(mask, path) -> None:
    """Write a mask with false -> 0 and true -> 255."""
    save_image(np.where(np.asarray(mask, dtype=bool), 255.0, 0.0), path)


def load_mask(path) -> np.ndarray:
    """Read a mask file, binarizing at half of its maximum value.

    An all-zero file gives an all-false mask.
    """
    img = load_image(path)
    peak = img.max()
    if peak <= 0:
        return np.zeros(img.shape, dtype=bool)
    return img >= 0.5 * peak


# ---------------------------------------------------------------------------
# solar disk

@dataclass(frozen=True)
class DiskGeometry:
    """Fitted solar disk: sub-pixel centre (x, y) and radius, in pixels."""

    center_x: float
    center_y: float
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError(f"disk radius must be positive, got {self.radius}")

    def mask(self, shape: tuple[int, int], margin: float = 0.0) -> np.ndarray:
        """Pixels whose centres lie within ``radius - margin`` of the centre."""
        yy, xx = np.indices(shape, dtype=np.float64)
        r = self.radius - margin
        return (xx - self.center_x) ** 2 + (yy - self.center_y) ** 2 <= r * r


def detect_disk(img, threshold_fraction: float = 0.5) -> tuple[DiskGeometry, np.ndarray]:
    """Locate the bright solar disk.

    The largest 8-connected component of pixels above
    ``threshold_fraction * max(img)`` is fitted by its centroid and the
    radius of the circle of equal area.

    Returns
    -------
    geometry : DiskGeometry
    mask : ndarray of bool
        True on pixels inside the fitted circle.
    """
    if not 0.0 < threshold_fraction < 1.0:
        raise ValueError("threshold_fraction must lie in (0, 1)")
    img = np.asarray(img, dtype=np.float64)
    peak = img.max()
    if not peak > 0:
        raise NoDiskFoundError("no disk found: image has no positive intensity")
    above = img > threshold_fraction * peak
    labels, n = ndi.label(above, structure=EIGHT_CONNECTED)
    if n == 0:
        raise NoDiskFoundError("no disk found: no pixel exceeds the threshold")
    areas = np.bincount(labels.ravel())[1:]
    biggest = int(np.argmax(areas)) + 1
    ys, xs = np.nonzero(labels == biggest)
    geom = DiskGeometry(
        center_x=float(xs.mean()),
        center_y=float(ys.mean()),
        radius=float(np.sqrt(xs.size / np.pi)),
    )
    return geom, geom.mask(img.shape)
