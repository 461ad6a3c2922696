"""Depth-discontinuity (DD) and curvature-discontinuity (CD) edge images.

Both detectors follow the Canny scheme: an edge-strength image, non-maximum
suppression along the strength gradient, then hysteresis between a low and
a high threshold. Thresholds are physical. For DD edges the strength is the
depth step across the two-pixel central-difference stencil, ``2 * |grad d|``,
in meters. For CD edges it is the equivalent step of the gradient direction
image, in radians, with differences wrapped to (-pi, pi].
"""

from __future__ import annotations

import numpy as np
from scipy import ndimage
from skimage import morphology

from . import kernels
from .imaging import DepthImage, GradientField

_3x3 = np.ones((3, 3), dtype=bool)


class EdgeInputError(ValueError):
    pass


def _canny(strength: np.ndarray, sx: np.ndarray, sy: np.ndarray, low: float, high: float,
           allowed: np.ndarray | None = None) -> np.ndarray:
    if not low < high:
        raise EdgeInputError("low threshold must be below high threshold")
    thin = kernels.nms(np.ascontiguousarray(strength), np.ascontiguousarray(sx), np.ascontiguousarray(sy))
    if allowed is not None:
        thin &= allowed
    weak = thin & (strength >= low)
    strong = thin & (strength >= high)
    return kernels.hysteresis(strong, weak)


def dd_strength(grad: GradientField) -> np.ndarray:
    return 2.0 * grad.magnitude


def detect_dd_edges(img: DepthImage, grad: GradientField, low: float = 0.005, high: float = 0.015) -> np.ndarray:
    """Pixels on depth steps: Canny on the depth image's gradient magnitude."""
    if grad.magnitude.shape != img.depth.shape:
        raise EdgeInputError("gradient field does not match the depth image")
    allowed = grad.valid & img.valid
    return _canny(dd_strength(grad), grad.gx, grad.gy, low, high, allowed)


def wrapped_direction_gradient(grad: GradientField, min_gradient: float = 0.0):
    """Central differences of the direction image with angle wrapping.

    A difference is only taken between two pixels whose depth gradient is at
    least ``min_gradient``; elsewhere the direction is undefined and the
    difference counts as zero.
    """
    th = grad.direction
    defined = grad.valid & (grad.magnitude >= min_gradient)

    def wrap(a):
        return (a + np.pi) % (2 * np.pi) - np.pi

    dx = np.zeros_like(th)
    dy = np.zeros_like(th)
    ok_x = defined[:, 2:] & defined[:, :-2]
    ok_y = defined[2:, :] & defined[:-2, :]
    dx[:, 1:-1] = np.where(ok_x, wrap(th[:, 2:] - th[:, :-2]) * 0.5, 0.0)
    dy[1:-1, :] = np.where(ok_y, wrap(th[2:, :] - th[:-2, :]) * 0.5, 0.0)
    return dx, dy


def detect_cd_edges(grad: GradientField, low: float = 0.12, high: float = 0.35, min_gradient: float = 0.0,
                    depth_edges: np.ndarray | None = None, exclusion: int = 2) -> np.ndarray:
    """Pixels where the surface orientation jumps while depth stays continuous.

    ``depth_edges`` (a DD edge image) marks where depth is not continuous;
    CD responses within ``exclusion`` pixels of it are dropped.
    """
    dx, dy = wrapped_direction_gradient(grad, min_gradient)
    strength = 2.0 * np.hypot(dx, dy)
    allowed = grad.valid.copy()
    if depth_edges is not None and depth_edges.any():
        allowed &= ~ndimage.binary_dilation(depth_edges, structure=_3x3, iterations=exclusion)
    return _canny(strength, dx, dy, low, high, allowed)


def morphological_cleanup(b: np.ndarray, close_size: int = 3, min_speck: int = 5) -> np.ndarray:
    """Closing, thinning to one-pixel width, and removal of specks smaller
    than ``min_speck`` pixels (8-connected)."""
    b = np.asarray(b, dtype=bool)
    if not b.any():
        return b.copy()
    if close_size > 1:
        fp = np.ones((close_size, close_size), dtype=bool)
        # pad so closing does not erode structures touching the border
        pad = close_size
        closed = ndimage.binary_closing(np.pad(b, pad), structure=fp)[pad:-pad, pad:-pad]
        b = b | closed
    thin = morphology.thin(b)
    labels, n = ndimage.label(thin, structure=_3x3)
    if n == 0:
        return thin
    sizes = np.bincount(labels.ravel())
    keep = sizes >= min_speck
    keep[0] = False
    return keep[labels]


def merge_edges(dd: np.ndarray, cd: np.ndarray) -> np.ndarray:
    dd = np.asarray(dd, dtype=bool)
    cd = np.asarray(cd, dtype=bool)
    if dd.shape != cd.shape:
        raise EdgeInputError(f"edge images differ in size: {dd.shape} vs {cd.shape}")
    return dd | cd
