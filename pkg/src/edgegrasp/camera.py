"""Pinhole camera: pixel <-> camera-frame point mapping."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class CameraModel:
    fx: float
    fy: float
    cx: float
    cy: float

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise ValueError("focal lengths must be positive")

    @classmethod
    def kinect(cls) -> "CameraModel":
        return cls(525.0, 525.0, 319.5, 239.5)

    def rays(self, height: int, width: int) -> np.ndarray:
        """Camera-frame ray per pixel with unit z component, shape (h, w, 3)."""
        rows, cols = np.mgrid[0:height, 0:width].astype(np.float64)
        return np.stack([(cols - self.cx) / self.fx, (rows - self.cy) / self.fy,
                         np.ones_like(rows)], axis=-1)

    def project(self, points: np.ndarray) -> np.ndarray:
        """Camera-frame points (N, 3) -> (row, col) float pixel coordinates (N, 2)."""
        p = np.atleast_2d(np.asarray(points, dtype=np.float64))
        z = p[:, 2]
        col = self.fx * p[:, 0] / z + self.cx
        row = self.fy * p[:, 1] / z + self.cy
        return np.stack([row, col], axis=1)

    def lift(self, rows, cols, z) -> np.ndarray:
        rows = np.asarray(rows, dtype=np.float64)
        cols = np.asarray(cols, dtype=np.float64)
        z = np.asarray(z, dtype=np.float64)
        return np.stack([(cols - self.cx) * z / self.fx, (rows - self.cy) * z / self.fy, z], axis=-1)

    def pixels_for_length(self, length: float, depth: float) -> float:
        """Approximate pixel span of a fronto-parallel ``length`` at ``depth``."""
        return length * 0.5 * (self.fx + self.fy) / depth


def look_at(position, target, up=(0.0, 0.0, 1.0)) -> np.ndarray:
    """Camera-to-world rotation for an OpenCV-style camera (x right, y down, z forward)."""
    position = np.asarray(position, dtype=np.float64)
    fwd = np.asarray(target, dtype=np.float64) - position
    fwd /= np.linalg.norm(fwd)
    right = np.cross(fwd, np.asarray(up, dtype=np.float64))
    n = np.linalg.norm(right)
    if n < 1e-9:
        raise ValueError("view direction is parallel to the up vector")
    right /= n
    down = np.cross(fwd, right)
    return np.stack([right, down, fwd], axis=1)
