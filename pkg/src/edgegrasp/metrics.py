"""Detection rates at edge, surface and object level against scene ground truth."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .features import EdgeLabel, FeaturedSegment
from .pairing import CandidatePair, folded_angle_difference, project_overlap
from .segments import LineSegment, segment_angle

MATCH_TOL = 3.0
MIN_COVERAGE = 0.7


# ------------------------------------------------------------------------
# ground-truth graspability

@dataclass
class _Chunk:
    seg: LineSegment
    normal: np.ndarray
    p3: np.ndarray      # (2, 3) camera-frame endpoints


def _chunks(edge, key, size: float = 12.0) -> list[_Chunk]:
    pts = edge.points
    n = len(pts)
    if n < 2:
        return []
    arc = np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(pts, axis=0), axis=1))])
    cuts = np.searchsorted(arc, np.arange(0.0, arc[-1] + size, size))
    cuts = np.unique(np.clip(np.append(cuts, n - 1), 0, n - 1))
    out = []
    for i, j in zip(cuts[:-1], cuts[1:]):
        if j <= i or np.linalg.norm(pts[j] - pts[i]) < 1.0:
            continue
        nv = edge.into[key][i:j + 1].mean(axis=0)
        nn = np.linalg.norm(nv)
        if nn == 0:
            continue
        out.append(_Chunk(LineSegment(pts[i], pts[j]), nv / nn, edge.points3d[[i, j]]))
    return out


def _chunk_pair_ok(a: _Chunk, b: _Chunk, alpha_f, eps_min, eps_max) -> bool:
    if folded_angle_difference(segment_angle(a.seg), segment_angle(b.seg)) >= 2 * math.degrees(alpha_f):
        return False
    core = project_overlap(a.seg, a.normal, b.seg, b.normal, 1e4)
    if core is None:
        return False
    _, _, ia, ib = core
    sa, sb = 0.5 * sum(ia), 0.5 * sum(ib)
    pa = a.p3[0] + sa * (a.p3[1] - a.p3[0])
    pb = b.p3[0] + sb * (b.p3[1] - b.p3[0])
    return eps_min < float(np.linalg.norm(pa - pb)) < eps_max


def mark_graspable_surfaces(truth, alpha_f: float = math.atan(0.4), eps_min: float = 0.02,
                            eps_max: float = 0.07) -> None:
    """Flag surfaces that two of their own graspable edges could pinch.

    Edges are cut into short chunks; a surface is graspable when some chunk
    pair passes the angle and overlap tests with an opening inside the
    gripper range.
    """
    by_id = {e.id: e for e in truth.edges}
    for s in truth.surfaces:
        chunks = [c for eid in s.edge_ids if by_id[eid].graspable for c in _chunks(by_id[eid], s.key)]
        s.graspable = any(_chunk_pair_ok(chunks[i], chunks[j], alpha_f, eps_min, eps_max)
                          for i in range(len(chunks)) for j in range(i + 1, len(chunks)))


# ------------------------------------------------------------------------
# evaluation

@dataclass
class DetectionReport:
    name: str
    edges_total: int
    edges_detected: int
    surfaces_total: int
    surfaces_detected: int
    objects_total: int
    objects_detected: int
    edge_hits: dict = field(default_factory=dict)
    surface_hits: dict = field(default_factory=dict)

    @staticmethod
    def _rate(k, n):
        return 1.0 if n == 0 else k / n

    @property
    def edge_rate(self) -> float:
        return self._rate(self.edges_detected, self.edges_total)

    @property
    def surface_rate(self) -> float:
        return self._rate(self.surfaces_detected, self.surfaces_total)

    @property
    def object_rate(self) -> float:
        return self._rate(self.objects_detected, self.objects_total)

    def row(self) -> dict:
        return {"scene": self.name, "objects": [self.objects_detected, self.objects_total],
                "surfaces": [self.surfaces_detected, self.surfaces_total],
                "edges": [self.edges_detected, self.edges_total],
                "object_rate": self.object_rate, "surface_rate": self.surface_rate,
                "edge_rate": self.edge_rate}


def _resample(points: np.ndarray, step: float = 1.0) -> tuple[np.ndarray, np.ndarray]:
    """Points every ``step`` pixels along the polyline, with segment index."""
    out, idx = [], []
    for k in range(len(points) - 1):
        a, b = points[k], points[k + 1]
        n = max(1, int(math.ceil(np.linalg.norm(b - a) / step)))
        t = np.arange(n)[:, None] / n
        out.append(a + t * (b - a))
        idx.append(np.full(n, k))
    out.append(points[-1:])
    idx.append([len(points) - 2])
    return np.concatenate(out), np.concatenate(idx)


def point_segment_distance(P: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    d = b - a
    L2 = float(d @ d)
    t = np.zeros(len(P)) if L2 == 0 else np.clip((P - a) @ d / L2, 0.0, 1.0)
    return np.linalg.norm(P - (a + t[:, None] * d), axis=1)


def _distance_matrix(P: np.ndarray, A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """(len(P), len(A)) distances from points to segments A[k]-B[k]."""
    D = B - A
    L2 = np.einsum("ij,ij->i", D, D)
    Q = P[:, None, :] - A[None]
    with np.errstate(invalid="ignore", divide="ignore"):
        t = np.where(L2 > 0, np.einsum("pki,ki->pk", Q, D) / L2, 0.0)
    t = np.clip(np.nan_to_num(t), 0.0, 1.0)
    return np.linalg.norm(Q - t[..., None] * D[None], axis=2)


def _accepts(kind: str, normals: np.ndarray, fs: FeaturedSegment) -> np.ndarray:
    """Per sample: does ``fs`` carry the label a truth edge of ``kind`` needs?"""
    if kind == "CD":
        return np.full(len(normals), fs.label is EdgeLabel.CD_BOTH)
    if not fs.label.is_dd:
        return np.zeros(len(normals), bool)
    return normals @ fs.object_normal() > 0


def _nearest_on(edge, P: np.ndarray):
    """Distance from each point to the polyline and the index of the closest piece."""
    pts = edge.points
    D = _distance_matrix(P, pts[:-1], pts[1:])
    idx = np.argmin(D, axis=1)
    return D[np.arange(len(P)), idx], idx


def _sample_normals(edge, k):
    if edge.kind != "DD":
        return np.zeros((len(k), 2))
    side = edge.object_side
    return side[np.minimum(k, len(side) - 1)]


def edge_coverage(edge, detected: list[FeaturedSegment], match_tol: float = MATCH_TOL,
                  others=()) -> float:
    """Fraction of the edge's length within ``match_tol`` of a detected segment
    with a matching label.

    Segments are compared at their detected position, before any foreground
    relocation. Where another truth edge in ``others`` passes within
    ``match_tol`` of a sample the two cannot be told apart in the image, and
    a label that fits either edge is accepted there.
    """
    P, k = _resample(edge.points)
    needs = [(edge.kind, _sample_normals(edge, k), np.ones(len(P), bool))]
    lo, hi = P.min(axis=0) - match_tol, P.max(axis=0) + match_tol
    for o in others:
        if o.id == edge.id or np.any(o.points.max(axis=0) < lo) or np.any(o.points.min(axis=0) > hi):
            continue
        d, ko = _nearest_on(o, P)
        close = d <= match_tol
        if close.any():
            needs.append((o.kind, _sample_normals(o, ko), close))
    hit = np.zeros(len(P), bool)
    if not detected:
        return 0.0
    geoms = [fs.source if fs.source is not None else fs.segment for fs in detected]
    A = np.array([g.p_start for g in geoms])
    B = np.array([g.p_end for g in geoms])
    NEAR = _distance_matrix(P, A, B) <= match_tol
    for f in np.flatnonzero(NEAR.any(axis=0)):
        near = NEAR[:, f]
        for kind, normals, where in needs:
            hit |= near & where & _accepts(kind, normals, detected[f])
    return float(hit.mean())


def _near_edges(pt, edges, tol) -> bool:
    for e in edges:
        if _distance_matrix(np.asarray(pt, float)[None], e.points[:-1], e.points[1:]).min() <= tol:
            return True
    return False


def _within_l1(mask: np.ndarray, r: int, c: int, k: int) -> bool:
    """Any marked pixel within L1 distance ``k`` of (r, c); same as testing a
    ``k``-fold cross dilation of ``mask`` at that pixel."""
    h, w = mask.shape
    for dr in range(-k, k + 1):
        rr = r + dr
        if not 0 <= rr < h:
            continue
        m = k - abs(dr)
        if mask[rr, max(c - m, 0):min(c + m, w - 1) + 1].any():
            return True
    return False


def evaluate_detection(detected: list[FeaturedSegment], pairs: list[CandidatePair], truth,
                       match_tol: float = MATCH_TOL, name: str = "scene",
                       region_tol: float | None = None) -> DetectionReport:
    """Edge, surface and object detection counts for one scene.

    Pairs built on segments absent from ``detected`` are ignored, so removing
    detections never raises a rate.
    """
    region_tol = 2 * match_tol if region_tol is None else region_tol
    ids = {id(fs) for fs in detected}
    pairs = [p for p in pairs if id(p.a.parent) in ids and id(p.b.parent) in ids]

    edges = truth.graspable_edges
    edge_hits = {e.id: edge_coverage(e, detected, match_tol, edges) >= MIN_COVERAGE for e in edges}

    by_id = {e.id: e for e in truth.edges}
    h, w = truth.object_map.shape
    surface_hits = {}
    for s in truth.surfaces:
        if not s.graspable:
            continue
        bound = [by_id[i] for i in s.edge_ids if by_id[i].graspable]
        ok = False
        for p in pairs:
            r, c = int(round(-p.p_f[1])), int(round(p.p_f[0]))
            if not (0 <= r < h and 0 <= c < w and _within_l1(s.pixels, r, c, 2)):
                continue
            if _near_edges(p.a.center, bound, region_tol) and _near_edges(p.b.center, bound, region_tol):
                ok = True
                break
        surface_hits[s.key] = ok

    graspable_objects = sorted({k[0] for k in surface_hits})
    detected_objects = {k[0] for k, v in surface_hits.items() if v}
    return DetectionReport(name, len(edges), sum(edge_hits.values()), len(surface_hits),
                           sum(surface_hits.values()), len(graspable_objects),
                           len(detected_objects & set(graspable_objects)), edge_hits, surface_hits)


def average_rates(reports: list[DetectionReport]) -> dict:
    if not reports:
        return {"edge_rate": float("nan"), "surface_rate": float("nan"), "object_rate": float("nan")}
    return {key: float(np.mean([getattr(r, key) for r in reports]))
            for key in ("edge_rate", "surface_rate", "object_rate")}


def format_table(reports: list[DetectionReport]) -> str:
    lines = [f"{'scene':<16}{'objects':>12}{'surfaces':>12}{'edges':>12}"]
    for r in reports:
        lines.append(f"{r.name:<16}{r.objects_detected:>5}/{r.objects_total:<6}"
                     f"{r.surfaces_detected:>5}/{r.surfaces_total:<6}{r.edges_detected:>5}/{r.edges_total:<6}")
    avg = average_rates(reports)
    lines.append(f"{'average (%)':<16}{100 * avg['object_rate']:>11.1f} {100 * avg['surface_rate']:>11.1f} "
                 f"{100 * avg['edge_rate']:>11.1f}")
    return "\n".join(lines)
