"""Two-finger candidate pairs of classified segments.

A pair is formed from two segments whose wrench normals oppose, whose line
angles differ by less than ``2 * alpha_f``, and whose projection masks
overlap. Each segment is swept by the side vector ``W`` of length ``w_max``
pointing toward its wrench side and perpendicular to the bisector of the
two segment lines; the intersection of the two swept parallelograms is the
overlap area ``H``. Projecting ``H`` back along ``W`` onto each segment gives
the contact regions, whose centres then share one line parallel to ``W``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
import shapely
from shapely.geometry import Polygon

from .features import EdgeLabel, FeaturedSegment, Mask
from .segments import LineSegment, segment_angle, xy_to_rc

log = logging.getLogger(__name__)

_AREA_EPS = 1e-9


@dataclass
class ContactRegion2D:
    parent: FeaturedSegment
    sub_segment: LineSegment
    side: int        # +1 if the wrench normal is the parent's + normal, else -1
    normal: np.ndarray

    @property
    def center(self) -> np.ndarray:
        return self.sub_segment.midpoint

    @property
    def length(self) -> float:
        return self.sub_segment.length


@dataclass
class CandidatePair:
    a: ContactRegion2D
    b: ContactRegion2D
    beta: float                 # degrees
    overlap: Polygon            # H in image xy
    p_f: np.ndarray
    w_dir: np.ndarray           # unit W of segment a (b's is the opposite)
    ia: int = -1
    ib: int = -1

    def overlap_mask(self, shape=None) -> Mask:
        """Pixels whose centres fall inside the overlap polygon."""
        minx, miny, maxx, maxy = self.overlap.bounds
        c0, c1 = int(math.floor(minx)), int(math.ceil(maxx))
        r0, r1 = int(math.floor(-maxy)), int(math.ceil(-miny))
        if shape is not None:
            r0, r1 = max(r0, 0), min(r1, shape[0] - 1)
            c0, c1 = max(c0, 0), min(c1, shape[1] - 1)
        rr, cc = np.mgrid[r0:r1 + 1, c0:c1 + 1]
        inside = shapely.contains_xy(self.overlap, cc.ravel().astype(float), -rr.ravel().astype(float))
        covered = np.stack([rr.ravel()[inside], cc.ravel()[inside]], axis=1)
        corners = np.asarray(self.overlap.exterior.coords)[:-1]
        return Mask(self.a.parent.segment, float("nan"), self.beta, covered, corners)


def folded_angle_difference(a_deg: float, b_deg: float) -> float:
    d = abs(a_deg - b_deg) % 180.0
    return min(d, 180.0 - d)


def angle_test(La: FeaturedSegment, Lb: FeaturedSegment, alpha_f: float) -> bool:
    """Line angles differ by less than twice the friction half-angle (radians)."""
    if La.label is EdgeLabel.CD_NONE or Lb.label is EdgeLabel.CD_NONE:
        raise ValueError("CD0 segments cannot take part in a pair")
    return folded_angle_difference(La.angle, Lb.angle) < 2.0 * math.degrees(alpha_f)


def _sweep(L: LineSegment, W: np.ndarray) -> Polygon:
    return Polygon([L.p_start, L.p_end, L.p_end + W, L.p_start + W])


def _project_interval(L: LineSegment, W: np.ndarray, pts: np.ndarray) -> tuple[float, float]:
    """Parameter range on L (0 at p_start, 1 at p_end) of ``pts`` projected along W."""
    d = L.p_end - L.p_start
    den = d[0] * W[1] - d[1] * W[0]
    q = pts - L.p_start
    s = (q[:, 0] * W[1] - q[:, 1] * W[0]) / den
    return float(max(s.min(), 0.0)), float(min(s.max(), 1.0))


def _sub_segment(L: LineSegment, s0: float, s1: float) -> LineSegment:
    d = L.p_end - L.p_start
    px = L.member_pixels
    if len(px):
        # member pixels whose projection on the line falls inside [s0, s1]
        xy = np.stack([px[:, 1], -px[:, 0]], axis=1).astype(float)
        s = (xy - L.p_start) @ d / float(d @ d)
        px = px[(s >= s0 - 0.5 / max(L.length, 1.0)) & (s <= s1 + 0.5 / max(L.length, 1.0))]
    return LineSegment(L.p_start + s0 * d, L.p_start + s1 * d, px)


def bisector_normal(La: LineSegment, Lb: LineSegment) -> np.ndarray:
    """Unit vector perpendicular to the bisector of the two segment lines."""
    _, ua = La.canonical()
    _, ub = Lb.canonical()
    if ua @ ub < 0:
        ub = -ub
    m = ua + ub
    m /= np.linalg.norm(m)
    return np.array([-m[1], m[0]])


def _strips_disjoint(La: LineSegment, Lb: LineSegment, wd: np.ndarray, w_max: float) -> bool:
    """Cheap exact rejection before the polygon intersection.

    In coordinates u (across W) and t (along W) the sweep of a covers
    t in [ta(u), ta(u) + w] and that of b covers [tb(u) - w, tb(u)], so they
    meet only where 0 < tb - ta < 2w for some shared u.
    """
    perp = np.array([-wd[1], wd[0]])
    ua = np.array([La.p_start @ perp, La.p_end @ perp])
    ub = np.array([Lb.p_start @ perp, Lb.p_end @ perp])
    u0, u1 = max(ua.min(), ub.min()), min(ua.max(), ub.max())
    if u1 <= u0:
        return True

    def t_at(L, uu, u):
        if uu[1] == uu[0]:
            return None
        ta, tb = L.p_start @ wd, L.p_end @ wd
        return ta + (u - uu[0]) / (uu[1] - uu[0]) * (tb - ta)

    g = []
    for u in (u0, u1):
        a, b = t_at(La, ua, u), t_at(Lb, ub, u)
        if a is None or b is None:
            return False
        g.append(b - a)
    tol = 1e-9 * max(1.0, w_max)
    return max(g) <= -tol or min(g) >= 2 * w_max + tol


def project_overlap(La: LineSegment, na: np.ndarray, Lb: LineSegment, nb: np.ndarray, w_max: float):
    """Geometric core of the overlap test.

    Returns (H polygon, unit W for a, (s0, s1) on a, (s0, s1) on b) or None.
    """
    if na @ nb >= 0:
        return None
    wd = bisector_normal(La, Lb)
    if wd @ na < 0:
        wd = -wd
    if wd @ nb > 0:
        return None
    if _strips_disjoint(La, Lb, wd, w_max):
        return None
    Ha = _sweep(La, w_max * wd)
    Hb = _sweep(Lb, -w_max * wd)
    if not (Ha.is_valid and Hb.is_valid) or Ha.area <= _AREA_EPS or Hb.area <= _AREA_EPS:
        return None
    H = Ha.intersection(Hb)
    if H.is_empty or H.area <= _AREA_EPS or H.geom_type != "Polygon":
        return None
    verts = np.asarray(H.exterior.coords)[:-1]
    ia = _project_interval(La, wd, verts)
    ib = _project_interval(Lb, wd, verts)
    if ia[1] <= ia[0] or ib[1] <= ib[0]:
        return None
    return H, wd, ia, ib


def overlap_test(La: FeaturedSegment, Lb: FeaturedSegment, w_max: float,
                 na: np.ndarray | None = None, nb: np.ndarray | None = None) -> CandidatePair | None:
    """Contact regions of a compatible pair, or None when the projections miss.

    ``na``/``nb`` pick one wrench normal per segment; by default the unique
    compatible choice is used (for two-sided CD segments the first one found).
    """
    if na is None or nb is None:
        for ha in La.wrench_normals():
            for hb in Lb.wrench_normals():
                if ha @ hb < 0:
                    out = overlap_test(La, Lb, w_max, ha, hb)
                    if out is not None:
                        return out
        return None
    core = project_overlap(La.segment, na, Lb.segment, nb, w_max)
    if core is None:
        return None
    H, wd, (a0, a1), (b0, b1) = core
    delta = folded_angle_difference(La.angle, Lb.angle)
    ra = ContactRegion2D(La, _sub_segment(La.segment, a0, a1), _side(La, na), na)
    rb = ContactRegion2D(Lb, _sub_segment(Lb.segment, b0, b1), _side(Lb, nb), nb)
    c = H.centroid
    return CandidatePair(ra, rb, 90.0 - 0.5 * delta, H, np.array([c.x, c.y]), wd)


def _side(L: FeaturedSegment, n: np.ndarray) -> int:
    return 1 if n @ L.segment.normal() > 0 else -1


@dataclass
class PairingGate:
    """Search-space limits: projection width and a 3-D centroid distance bound."""
    eps_max: float = 0.07
    gate: bool = True
    gate_factor: float = 1.5
    w_max_px: float | None = None   # fixed projection width overriding the depth-derived one


def _segment_point3d(fs: FeaturedSegment, camera):
    z = fs.object_depth
    x, y = fs.segment.midpoint
    return camera.lift(np.array([-y]), np.array([x]), np.array([z]))[0]


def enumerate_pairs(segments: list[FeaturedSegment], alpha_f: float, camera=None,
                    gate: PairingGate | None = None, w_max: float | None = None) -> list[CandidatePair]:
    """All compatible pairs in deterministic (i, j, hypothesis) order.

    The projection width is ``w_max`` pixels if given, otherwise the pixel
    length of ``eps_max`` at the nearer of the two segment depths.
    """
    gate = gate or PairingGate()
    if w_max is None:
        w_max = gate.w_max_px
    if w_max is None and camera is None:
        raise ValueError("need a camera or an explicit w_max")
    usable = [(i, s) for i, s in enumerate(segments) if s.label is not EdgeLabel.CD_NONE]
    pts = {}
    if camera is not None:
        pts = {i: _segment_point3d(s, camera) for i, s in usable}
    out = []
    evaluated = 0
    for k, (i, La) in enumerate(usable):
        for j, Lb in usable[k + 1:]:
            evaluated += 1
            if gate.gate and camera is not None:
                if np.linalg.norm(pts[i] - pts[j]) >= gate.gate_factor * gate.eps_max:
                    continue
            if not angle_test(La, Lb, alpha_f):
                continue
            wm = w_max
            if wm is None:
                z = min(La.object_depth, Lb.object_depth)
                wm = camera.pixels_for_length(gate.eps_max, z)
            for na in La.wrench_normals():
                for nb in Lb.wrench_normals():
                    if na @ nb >= 0:
                        continue
                    pair = overlap_test(La, Lb, wm, na, nb)
                    if pair is not None:
                        pair.ia, pair.ib = i, j
                        out.append(pair)
    log.debug("pairing: %d segments, %d evaluations, %d pairs", len(usable), evaluated, len(out))
    return out
