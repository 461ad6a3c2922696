"""Lift 2-D contact-region pairs to 3-D parallel-jaw grasps.

Grasp frame conventions (camera frame, meters): ``V_G`` is the approach
direction, the unit normal of the plane through both contact regions,
pointing away from the camera into the scene. ``V_c`` is the closing
direction from the second contact to the first, made orthogonal to ``V_G``.
``R_G`` has columns ``[V_c, V_G x V_c, V_G]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .camera import CameraModel
from .imaging import DepthImage

__all__ = ["CameraModel", "PlaneFit", "GraspCandidate", "backproject", "width_check", "fit_plane_ransac",
           "grasp_parameters", "rank_candidates", "DegeneratePlaneError", "InsufficientSupportError",
           "DegenerateGeometryError"]


class DegeneratePlaneError(ValueError):
    pass


class InsufficientSupportError(ValueError):
    pass


class DegenerateGeometryError(ValueError):
    pass


def backproject(pixels, img: DepthImage, cam: CameraModel) -> tuple[np.ndarray, int]:
    """Camera-frame points of valid pixels and the number of skipped ones."""
    px = np.asarray(pixels, dtype=np.int64).reshape(-1, 2)
    h, w = img.depth.shape
    inb = (px[:, 0] >= 0) & (px[:, 0] < h) & (px[:, 1] >= 0) & (px[:, 1] < w)
    ok = inb.copy()
    ok[inb] = img.valid[px[inb, 0], px[inb, 1]]
    q = px[ok]
    pts = cam.lift(q[:, 0], q[:, 1], img.depth[q[:, 0], q[:, 1]])
    return pts.reshape(-1, 3), int((~ok).sum())


def width_check(pa_mean, pb_mean, eps_min: float, eps_max: float) -> bool:
    if not eps_min < eps_max:
        raise ValueError("eps_min must be below eps_max")
    d = float(np.linalg.norm(np.subtract(pa_mean, pb_mean)))
    return eps_min < d < eps_max


@dataclass
class PlaneFit:
    normal: np.ndarray      # unit V_R
    offset: float           # normal . x = offset on the plane
    inliers: np.ndarray     # bool mask over the input points
    rms: float

    def distances(self, points) -> np.ndarray:
        return np.asarray(points) @ self.normal - self.offset

    @property
    def inlier_ratio(self) -> float:
        return float(self.inliers.mean()) if len(self.inliers) else 0.0


def _plane_lsq(points: np.ndarray) -> tuple[np.ndarray, float]:
    c = points.mean(axis=0)
    _, _, vt = np.linalg.svd(points - c, full_matrices=False)
    n = vt[-1]
    return n, float(n @ c)


def _orient(n: np.ndarray, off: float):
    # face the camera (origin): offset < 0 means the origin is on the + side
    if off > 0 or (off == 0 and n[2] > 0):
        return -n, -off
    return n, off


def _sample_triples(rng, n: int, k: int) -> np.ndarray:
    """``k`` index triples, each of three distinct values in [0, n)."""
    i = rng.integers(0, n, k)
    j = rng.integers(0, n - 1, k)
    j = j + (j >= i)
    lo, hi = np.minimum(i, j), np.maximum(i, j)
    m = rng.integers(0, n - 2, k)
    m = m + (m >= lo)
    m = m + (m >= hi)
    return np.stack([i, j, m], axis=1)


def fit_plane_ransac(points, t_max: float = 0.008, iterations: int = 256, seed=0,
                     min_inliers: int = 10) -> PlaneFit:
    """Consensus plane, refit by least squares on the consensus set.

    Minimal samples whose three points are collinear are skipped. The
    returned inliers are the points within ``t_max`` of the refit plane.
    """
    P = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    n_pts = len(P)
    if n_pts < 3:
        raise DegeneratePlaneError("need at least three points")
    scale = float(np.max(np.linalg.norm(P - P.mean(axis=0), axis=1))) or 1.0
    if n_pts == 3:
        idx = np.arange(3)[None]
    else:
        idx = _sample_triples(np.random.default_rng(seed), n_pts, iterations)
    A, B, C = P[idx[:, 0]], P[idx[:, 1]], P[idx[:, 2]]
    nrm = np.cross(B - A, C - A)
    nn = np.linalg.norm(nrm, axis=1)
    ok = nn > 1e-9 * scale * scale
    best_mask = None
    if ok.any():
        nrm = nrm[ok] / nn[ok, None]
        dist = np.abs(P @ nrm.T - np.einsum("ij,ij->i", A[ok], nrm)[None, :])
        counts = (dist <= t_max).sum(axis=0)
        k = int(np.argmax(counts))      # first maximum, as a sequential scan would keep
        best_count, best_mask = int(counts[k]), dist[:, k] <= t_max
    if best_mask is None:
        raise DegeneratePlaneError("every sampled triple is collinear")
    need = min(min_inliers, n_pts)
    if best_count < need:
        raise InsufficientSupportError(f"only {best_count} inliers (< {need})")
    n, off = _orient(*_plane_lsq(P[best_mask]))
    d = P @ n - off
    inl = np.abs(d) <= t_max
    if inl.sum() < need:
        raise InsufficientSupportError(f"only {int(inl.sum())} inliers after refit (< {need})")
    rms = float(np.sqrt(np.mean(d[inl] ** 2)))
    return PlaneFit(n, off, inl, rms)


@dataclass
class GraspCandidate:
    P_G: np.ndarray
    R_G: np.ndarray
    theta_G: tuple[float, float]            # (pre-contact opening, contact width)
    contacts: tuple[np.ndarray, np.ndarray]
    V_G: np.ndarray
    V_c: np.ndarray
    V_R: np.ndarray
    plane: PlaneFit | None = None
    score: float = 0.0
    provenance: dict = field(default_factory=dict)

    @property
    def width(self) -> float:
        return float(np.linalg.norm(self.contacts[0] - self.contacts[1]))

    def invariant_residuals(self, eps_d: float) -> dict:
        c1, c2 = self.contacts
        R = self.R_G
        return {
            "orthonormality": float(np.max(np.abs(R.T @ R - np.eye(3)))),
            "det": float(np.linalg.det(R)),
            "perpendicularity": abs(float(self.V_G @ self.V_c)),
            "position": float(np.linalg.norm(self.P_G - 0.5 * (c1 + c2) + eps_d * self.V_G)),
        }

    def check(self, eps_min: float, eps_max: float, eps_d: float) -> None:
        r = self.invariant_residuals(eps_d)
        if r["orthonormality"] >= 1e-9 or abs(r["det"] - 1.0) >= 1e-9:
            raise DegenerateGeometryError("grasp frame is not a rotation")
        if r["perpendicularity"] >= 1e-6:
            raise DegenerateGeometryError("approach and closing directions are not orthogonal")
        if r["position"] >= 1e-9:
            raise DegenerateGeometryError("grasp position inconsistent with contacts")
        if not eps_min < self.width < eps_max:
            raise DegenerateGeometryError(f"contact width {self.width:.4f} outside gripper range")


def grasp_parameters(regions3d, plane: PlaneFit, eps_d: float = 0.08, eps_max: float = 0.07) -> GraspCandidate:
    """Grasp pose from the two contact point sets and their common plane.

    ``regions3d`` is ``(P_i, P_j)``; the contacts are their centroids.
    """
    Pi, Pj = (np.asarray(p, dtype=np.float64).reshape(-1, 3) for p in regions3d)
    if len(Pi) == 0 or len(Pj) == 0:
        raise DegenerateGeometryError("empty contact region")
    c1, c2 = Pi.mean(axis=0), Pj.mean(axis=0)
    n = np.asarray(plane.normal, dtype=np.float64)
    n = n / np.linalg.norm(n)
    mid = 0.5 * (c1 + c2)
    V_G = n if float(n @ mid) > 0 else -n
    d = c1 - c2
    dn = float(np.linalg.norm(d))
    if dn == 0:
        raise DegenerateGeometryError("contacts coincide")
    v = d / dn
    if abs(float(v @ V_G)) > 1.0 - 1e-3:
        raise DegenerateGeometryError("closing direction parallel to approach")
    V_c = v - (v @ V_G) * V_G
    V_c /= np.linalg.norm(V_c)
    y = np.cross(V_G, V_c)
    y /= np.linalg.norm(y)
    R = np.column_stack([V_c, y, V_G])
    P_G = mid - eps_d * V_G
    return GraspCandidate(P_G, R, (float(eps_max), dn), (c1, c2), V_G, V_c, n.copy(), plane)


def score_candidate(length_px: float, plane: PlaneFit, w_length=1.0, w_inlier=10.0, w_rms=1000.0) -> float:
    return float(w_length * length_px + w_inlier * plane.inlier_ratio - w_rms * plane.rms)


_FLIP = np.diag([-1.0, -1.0, 1.0])


def rotation_angle(Ra: np.ndarray, Rb: np.ndarray) -> float:
    """Angle (degrees) of the relative rotation, counting the jaw-swapped
    frame (half turn about the approach axis) as the same grasp."""
    best = math.pi
    for Rc in (Rb, Rb @ _FLIP):
        c = (np.trace(Ra.T @ Rc) - 1.0) / 2.0
        best = min(best, math.acos(max(-1.0, min(1.0, c))))
    return math.degrees(best)


def rank_candidates(cands: list[GraspCandidate], dedup_distance: float = 0.01,
                    dedup_angle_deg: float = 10.0) -> list[GraspCandidate]:
    """Sort by descending score and merge near-duplicate poses."""
    order = sorted(range(len(cands)), key=lambda i: (-cands[i].score, i))
    kept: list[GraspCandidate] = []
    for i in order:
        c = cands[i]
        dup = any(np.linalg.norm(c.P_G - k.P_G) < dedup_distance
                  and rotation_angle(c.R_G, k.R_G) < dedup_angle_deg for k in kept)
        if not dup:
            kept.append(c)
    return kept
