"""Depth image container, loading, shadow repair and gradient images."""

from __future__ import annotations

import io
import math
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage

from . import kernels


class DepthFormatError(ValueError):
    """The byte stream is not a readable 16-bit depth raster."""


class DepthInputError(ValueError):
    """The depth data is readable but unusable (empty, too small, ...)."""


@dataclass(frozen=True)
class DepthImage:
    """Per-pixel range in meters with a validity mask.

    ``depth`` is a ``(height, width)`` float64 array; pixels where ``valid``
    is False carry no measurement and their depth value is meaningless
    (kept at 0).
    """

    depth: np.ndarray
    valid: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.depth, dtype=np.float64)
        v = np.asarray(self.valid, dtype=bool)
        if d.ndim != 2 or d.shape != v.shape:
            raise DepthInputError(f"depth {d.shape} and mask {v.shape} must be equal 2-D shapes")
        if d.size == 0:
            raise DepthInputError("depth image has zero pixels")
        if not np.all(np.isfinite(d[v])) or np.any(d[v] < 0):
            raise DepthInputError("valid depths must be finite and non-negative")
        d = np.where(v, d, 0.0)
        d.setflags(write=False)
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "depth", d)
        object.__setattr__(self, "valid", v)

    @property
    def height(self) -> int:
        return self.depth.shape[0]

    @property
    def width(self) -> int:
        return self.depth.shape[1]

    @classmethod
    def from_array(cls, depth, valid=None) -> "DepthImage":
        depth = np.asarray(depth, dtype=np.float64)
        if valid is None:
            valid = np.isfinite(depth) & (depth > 0)
        return cls(np.where(valid, depth, 0.0), valid)

    def filled_for_filtering(self) -> np.ndarray:
        """Depth with invalid pixels replaced by their nearest valid value.

        Only meant as input to smoothing filters; results at invalid pixels
        must be masked by the caller.
        """
        if self.valid.all():
            return np.array(self.depth)
        if not self.valid.any():
            return np.zeros_like(self.depth)
        idx = ndimage.distance_transform_edt(~self.valid, return_distances=False, return_indices=True)
        return self.depth[idx[0], idx[1]]


@dataclass(frozen=True)
class GradientField:
    """Depth gradient images; ``gx`` is d/d(column), ``gy`` is d/d(row)."""

    gx: np.ndarray
    gy: np.ndarray
    magnitude: np.ndarray
    direction: np.ndarray
    valid: np.ndarray

    @classmethod
    def from_components(cls, gx, gy, valid=None) -> "GradientField":
        gx = np.asarray(gx, dtype=np.float64)
        gy = np.asarray(gy, dtype=np.float64)
        if valid is None:
            valid = np.ones(gx.shape, dtype=bool)
        return cls(gx, gy, np.hypot(gx, gy), np.arctan2(gy, gx), np.asarray(valid, dtype=bool))


# --------------------------------------------------------------------------
# loading

_PGM_HEADER = re.compile(rb"^P5\s+(?:#[^\n]*\n\s*)*(\d+)\s+(?:#[^\n]*\n\s*)*(\d+)\s+(?:#[^\n]*\n\s*)*(\d+)\s")


def _read_pgm(data: bytes) -> np.ndarray:
    m = _PGM_HEADER.match(data)
    if m is None:
        raise DepthFormatError("malformed PGM header")
    w, h, maxval = (int(g) for g in m.groups())
    if w == 0 or h == 0:
        raise DepthInputError("raster has zero dimensions")
    if maxval < 256:
        raise DepthFormatError(f"expected a 16-bit PGM (maxval > 255), got maxval={maxval}")
    body = data[m.end():]
    need = 2 * w * h
    if len(body) < need:
        raise DepthFormatError(f"PGM body truncated: {len(body)} of {need} bytes")
    return np.frombuffer(body[:need], dtype=">u2").reshape(h, w)


def _read_png(data: bytes) -> np.ndarray:
    from PIL import Image

    try:
        with Image.open(io.BytesIO(data)) as im:
            if im.mode not in ("I;16", "I;16B", "I;16L", "I"):
                raise DepthFormatError(f"expected a 16-bit single-channel PNG, got mode {im.mode}")
            arr = np.array(im)
    except (OSError, SyntaxError) as exc:
        raise DepthFormatError(f"unreadable PNG: {exc}") from exc
    if arr.ndim != 2:
        raise DepthFormatError("expected a single-channel raster")
    if arr.size == 0:
        raise DepthInputError("raster has zero dimensions")
    return arr.astype(np.uint16)


def load_depth(source, scale: float = 0.001) -> DepthImage:
    """Read a 16-bit single-channel raster (binary PGM or PNG).

    Parameters
    ----------
    source : bytes, path or binary file object
    scale : float
        Meters per raw unit. Raw zeros are sensor non-returns and become
        invalid pixels.
    """
    if isinstance(source, (bytes, bytearray)):
        data = bytes(source)
    elif isinstance(source, (str, Path)):
        data = Path(source).read_bytes()
    else:
        data = source.read()
    if data[:2] == b"P5":
        raw = _read_pgm(data)
    elif data[:8] == b"\x89PNG\r\n\x1a\n":
        raw = _read_png(data)
    else:
        raise DepthFormatError("unrecognised raster format (need binary PGM or PNG)")
    valid = raw != 0
    return DepthImage(raw.astype(np.float64) * scale, valid)


def save_depth_pgm(img: DepthImage, path, scale: float = 0.001) -> None:
    """Write ``img`` as a 16-bit binary PGM; invalid pixels are written as 0."""
    raw = np.rint(img.depth / scale)
    if np.any(raw[img.valid] > 65535):
        raise DepthInputError("depth exceeds the 16-bit range at this scale")
    raw = np.where(img.valid, np.clip(raw, 1, 65535), 0).astype(">u2")
    header = f"P5\n{img.width} {img.height}\n65535\n".encode()
    Path(path).write_bytes(header + raw.tobytes())


# --------------------------------------------------------------------------
# shadows and gradients

def fill_shadows(img: DepthImage, window: int = 5, max_passes: int = 16) -> DepthImage:
    """Recursive median fill of sensor shadows.

    Each pass assigns every invalid pixel that sees at least one valid pixel
    in its ``window`` x ``window`` neighbourhood the median of those valid
    neighbours. Passes use the previous pass's values only, so the result
    does not depend on scan order. Valid pixels are never modified.
    """
    if window < 3 or window % 2 == 0:
        raise ValueError("window must be an odd integer >= 3")
    if img.valid.all():
        return img
    depth = np.array(img.depth)
    valid = np.array(img.valid)
    half = window // 2
    for _ in range(max_passes):
        if valid.all():
            break
        new_depth, new_valid = kernels.median_fill_pass(depth, valid, half)
        if np.array_equal(new_valid, valid):
            break
        depth, valid = new_depth, new_valid
    return DepthImage(depth, valid)


def _central(a: np.ndarray):
    gx = np.empty_like(a)
    gy = np.empty_like(a)
    gx[:, 1:-1] = (a[:, 2:] - a[:, :-2]) * 0.5
    gx[:, 0] = a[:, 1] - a[:, 0]
    gx[:, -1] = a[:, -1] - a[:, -2]
    gy[1:-1, :] = (a[2:, :] - a[:-2, :]) * 0.5
    gy[0, :] = a[1, :] - a[0, :]
    gy[-1, :] = a[-1, :] - a[-2, :]
    return gx, gy


def gradient_components(depth: np.ndarray, stencil: str = "central"):
    if stencil == "central":
        return _central(depth)
    if stencil == "sobel":
        return (ndimage.sobel(depth, axis=1, mode="nearest") / 8.0,
                ndimage.sobel(depth, axis=0, mode="nearest") / 8.0)
    raise ValueError(f"unknown stencil {stencil!r}")


def normalized_smooth(a: np.ndarray, weight: np.ndarray, sigma: float) -> np.ndarray:
    """Gaussian normalized convolution; zero-weight pixels contribute nothing.

    Where no weighted pixel is in reach the plain smoothed value is kept.
    """
    w = weight.astype(np.float64)
    den = ndimage.gaussian_filter(w, sigma, mode="nearest")
    num = ndimage.gaussian_filter(a * w, sigma, mode="nearest")
    plain = ndimage.gaussian_filter(a, sigma, mode="nearest")
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(den > 1e-6, num / den, plain)


def compute_gradients(img: DepthImage, stencil: str = "central", smooth_sigma: float = 0.0,
                      barrier: np.ndarray | None = None) -> GradientField:
    """Gradient, magnitude and direction images of the depth map.

    Central differences in the interior and one-sided differences on the
    border. Pixels that are invalid, or whose stencil touches an invalid
    pixel, are flagged invalid in the result and carry zero gradient. With a
    ``barrier`` mask, barrier pixels are left out of the smoothing.
    """
    if img.height < 2 or img.width < 2:
        raise DepthInputError("gradient needs an image of at least 2x2 pixels")
    d = img.filled_for_filtering()
    if smooth_sigma > 0 and barrier is not None and np.any(barrier):
        # smooth the gradient vectors instead of the depth, ignoring the
        # barrier, so depth steps do not bleed into surface orientation
        gx, gy = gradient_components(d, stencil)
        keep = ~np.asarray(barrier, dtype=bool)
        gx = normalized_smooth(gx, keep, smooth_sigma)
        gy = normalized_smooth(gy, keep, smooth_sigma)
    else:
        if smooth_sigma > 0:
            d = ndimage.gaussian_filter(d, smooth_sigma, mode="nearest")
        gx, gy = gradient_components(d, stencil)
    valid = np.array(img.valid)
    if not valid.all():
        valid = ~ndimage.binary_dilation(~valid, structure=np.ones((3, 3), bool))
        gx = np.where(valid, gx, 0.0)
        gy = np.where(valid, gy, 0.0)
    return GradientField.from_components(gx, gy, valid)
