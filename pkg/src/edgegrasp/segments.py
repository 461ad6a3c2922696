"""Pixel chains and their line-segment approximation.

Pixel chains use (row, col) integer coordinates. Line segments live in the
image plane with x = col and y = -row, so angles are counter-clockwise from
the positive horizontal axis as the image is displayed.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

log = logging.getLogger(__name__)

_NEIGH = [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)]


class SegmentError(ValueError):
    pass


@dataclass
class PixelChain:
    pixels: np.ndarray  # (n, 2) int (row, col), consecutive entries are 8-neighbours

    def __len__(self):
        return len(self.pixels)


@dataclass
class LineSegment:
    p_start: np.ndarray  # (x, y)
    p_end: np.ndarray
    member_pixels: np.ndarray = field(default_factory=lambda: np.zeros((0, 2), dtype=np.int64))

    def __post_init__(self):
        self.p_start = np.asarray(self.p_start, dtype=np.float64)
        self.p_end = np.asarray(self.p_end, dtype=np.float64)
        self.member_pixels = np.asarray(self.member_pixels, dtype=np.int64).reshape(-1, 2)

    @classmethod
    def from_pixels(cls, a_rc, b_rc, members=None) -> "LineSegment":
        return cls(rc_to_xy(a_rc), rc_to_xy(b_rc), members if members is not None else np.zeros((0, 2)))

    def reversed(self) -> "LineSegment":
        return LineSegment(self.p_end.copy(), self.p_start.copy(), self.member_pixels[::-1].copy())

    @property
    def length(self) -> float:
        return segment_length(self)

    @property
    def midpoint(self) -> np.ndarray:
        return 0.5 * (self.p_start + self.p_end)

    def canonical(self) -> tuple[np.ndarray, np.ndarray]:
        """(origin, direction) with the direction at ``segment_angle`` and the
        origin the endpoint that comes first along it."""
        a = math.radians(segment_angle(self))
        u = np.array([math.cos(a), math.sin(a)])
        if (self.p_end - self.p_start) @ u >= 0:
            return self.p_start, u
        return self.p_end, u

    def normal(self) -> np.ndarray:
        """Unit normal on the positive (counter-clockwise) side."""
        _, u = self.canonical()
        return np.array([-u[1], u[0]])


def rc_to_xy(rc) -> np.ndarray:
    rc = np.asarray(rc, dtype=np.float64)
    return np.stack([rc[..., 1], -rc[..., 0]], axis=-1)


def xy_to_rc(xy) -> np.ndarray:
    xy = np.asarray(xy, dtype=np.float64)
    return np.stack([-xy[..., 1], xy[..., 0]], axis=-1)


def segment_length(L: LineSegment) -> float:
    return float(np.hypot(*(L.p_end - L.p_start)))


def segment_angle(L: LineSegment) -> float:
    """Angle of the segment's line in degrees, folded into [0, 180)."""
    d = L.p_end - L.p_start
    if not np.any(d):
        raise SegmentError("zero-length segment has no angle")
    a = math.degrees(math.atan2(d[1], d[0])) % 180.0
    return 0.0 if a >= 180.0 else a


# ------------------------------------------------------------------------
# chains

def _m_adjacency(mask: np.ndarray, r: int, c: int) -> list[tuple[int, int]]:
    """m-adjacent marked neighbours: 4-neighbours, plus diagonals that are not
    already reachable through a shared marked 4-neighbour."""
    h, w = mask.shape
    out = []
    for dr, dc in _NEIGH:
        rr, cc = r + dr, c + dc
        if not (0 <= rr < h and 0 <= cc < w) or not mask[rr, cc]:
            continue
        if dr != 0 and dc != 0:
            if mask[r + dr, c] or mask[r, c + dc]:
                continue
        out.append((rr, cc))
    return out


def connect_components(edges: np.ndarray) -> list[PixelChain]:
    """Group marked pixels into simple 8-connected chains.

    Pixels with more than two m-adjacent neighbours are junctions; chains are
    traced through non-junction pixels and each junction pixel is appended
    to the first chain whose end touches it (or becomes its own chain).
    Chains are ordered by the raster index of their first pixel.
    """
    mask = np.asarray(edges, dtype=bool)
    h, w = mask.shape
    padded = np.zeros((h + 2, w + 2), dtype=bool)
    padded[1:-1, 1:-1] = mask
    coords = np.argwhere(mask)
    adj = {}
    for r, c in coords:
        adj[(int(r), int(c))] = [(rr - 1, cc - 1) for rr, cc in _m_adjacency(padded, int(r) + 1, int(c) + 1)]
    junction = {p for p, nb in adj.items() if len(nb) > 2}

    seen = set()
    chains: list[list[tuple[int, int]]] = []

    def trace(start):
        path = [start]
        seen.add(start)
        cur = start
        while True:
            nxt = [q for q in adj[cur] if q not in seen and q not in junction]
            if not nxt:
                break
            cur = min(nxt)
            seen.add(cur)
            path.append(cur)
        return path

    order = sorted(adj)
    # open chains first from their endpoints, then closed loops
    for p in order:
        if p in seen or p in junction:
            continue
        free = [q for q in adj[p] if q not in junction]
        if len(free) <= 1:
            chains.append(trace(p))
    for p in order:
        if p not in seen and p not in junction:
            chains.append(trace(p))

    for j in sorted(junction):
        attached = False
        for ch in chains:
            for end in (-1, 0):
                q = ch[end]
                if max(abs(q[0] - j[0]), abs(q[1] - j[1])) == 1:
                    if end == -1:
                        ch.append(j)
                    else:
                        ch.insert(0, j)
                    attached = True
                    break
            if attached:
                break
        if not attached:
            chains.append([j])
    chains.sort(key=lambda ch: min(r * w + c for r, c in ch))
    return [PixelChain(np.array(ch, dtype=np.int64)) for ch in chains]


# ------------------------------------------------------------------------
# line fitting

def _deviations(pts: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    d = b - a
    n = float(np.hypot(*d))
    if n == 0:
        return np.hypot(*(pts - a).T)
    return np.abs(d[0] * (pts[:, 1] - a[1]) - d[1] * (pts[:, 0] - a[0])) / n


def split_points(pts: np.ndarray, dev_tol: float) -> list[int]:
    """Douglas-Peucker breakpoints (indices into ``pts``), iterative."""
    n = len(pts)
    keep = {0, n - 1}
    stack = [(0, n - 1)]
    while stack:
        i, j = stack.pop()
        if j - i < 2:
            continue
        dev = _deviations(pts[i + 1:j], pts[i], pts[j])
        k = int(np.argmax(dev))
        if dev[k] >= dev_tol:
            m = i + 1 + k
            keep.add(m)
            stack.append((i, m))
            stack.append((m, j))
    return sorted(keep)


def fit_line_segments(chain: PixelChain, dev_tol: float = 1.5) -> list[LineSegment]:
    """Approximate the chain by segments whose members stay within ``dev_tol``
    pixels of their endpoint line. Segments share breakpoints as endpoints;
    member pixel slices are contiguous and partition the chain."""
    if dev_tol <= 0:
        raise SegmentError("dev_tol must be positive")
    px = np.asarray(chain.pixels)
    if len(px) < 2:
        raise SegmentError("chain needs at least two pixels")
    pts = rc_to_xy(px)
    # closed loops arrive as open paths whose ends are adjacent; the chord is
    # then near zero and _deviations falls back to point distance
    br = split_points(pts, dev_tol)
    segs = []
    for s, (i, j) in enumerate(zip(br[:-1], br[1:])):
        stop = j + 1 if s == len(br) - 2 else j
        segs.append(LineSegment(pts[i], pts[j], px[i:stop]))
    return segs


def extract_segments(edges: np.ndarray, dev_tol: float = 1.5, min_len: float = 8.0) -> list[LineSegment]:
    """Chains -> segments, dropping chains shorter than ``min_len`` pixels.

    The filter acts on whole chains: a long curved chain keeps every piece,
    however short, so that tight curves are not lost.
    """
    out = []
    for chain in connect_components(edges):
        if len(chain) < 2:
            continue
        px = chain.pixels.astype(float)
        arc = float(np.linalg.norm(np.diff(px, axis=0), axis=1).sum())
        if arc < min_len:
            log.debug("dropping %.1f px chain at %s (min_len %.1f)", arc, chain.pixels[0], min_len)
            continue
        out.extend(fit_line_segments(chain, dev_tol))
    return out
