"""Edge-type labels from parallelogram masks around each line segment.

Masks are parallelograms spanned by a segment and a side vector W of length
``w`` at angle ``gamma`` (degrees, counter-clockwise) from the segment's
canonical direction. The predefined masks are the on-edge band ``H0`` and
the two side bands ``H+`` (gamma = +90) and ``H-`` (gamma = -90) of width
``w0``.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import ndimage

from .imaging import DepthImage, GradientField
from .segments import LineSegment, rc_to_xy, segment_angle, xy_to_rc

log = logging.getLogger(__name__)

_EPS = 1e-9


class FeatureError(ValueError):
    pass


class EdgeLabel(str, enum.Enum):
    DD_NEG = "DD-"
    DD_POS = "DD+"
    CD_BOTH = "CD+-"
    CD_NONE = "CD0"

    @property
    def is_dd(self) -> bool:
        return self in (EdgeLabel.DD_NEG, EdgeLabel.DD_POS)

    @property
    def is_cd(self) -> bool:
        return not self.is_dd


@dataclass
class Mask:
    segment: LineSegment
    w: float
    gamma: float
    covered: np.ndarray  # (k, 2) int (row, col)
    corners: np.ndarray  # (4, 2) xy parallelogram corners

    @property
    def empty(self) -> bool:
        return len(self.covered) == 0

    def values(self, image: np.ndarray) -> np.ndarray:
        return image[self.covered[:, 0], self.covered[:, 1]] if len(self.covered) else np.zeros(0)


def parallelogram(L: LineSegment, w: float, gamma: float, centered: bool = False) -> np.ndarray:
    """Corner points (xy) of h(L, (w, gamma)) in order o, o+L, o+L+W, o+W."""
    o, u = L.canonical()
    a = math.atan2(u[1], u[0]) + math.radians(gamma)
    W = w * np.array([math.cos(a), math.sin(a)])
    Lv = u * L.length
    if centered:
        o = o - 0.5 * W
    return np.array([o, o + Lv, o + Lv + W, o + W])


def rasterize_parallelogram(corners: np.ndarray, shape: tuple[int, int] | None) -> np.ndarray:
    """Pixel centres with parallelogram coordinates s in [0, 1), t in (0, 1]."""
    o = corners[0]
    Lv = corners[1] - corners[0]
    W = corners[3] - corners[0]
    rc = xy_to_rc(corners)
    r0, r1 = int(math.floor(rc[:, 0].min())) - 1, int(math.ceil(rc[:, 0].max())) + 1
    c0, c1 = int(math.floor(rc[:, 1].min())) - 1, int(math.ceil(rc[:, 1].max())) + 1
    if shape is not None:
        r0, r1 = max(r0, 0), min(r1, shape[0] - 1)
        c0, c1 = max(c0, 0), min(c1, shape[1] - 1)
    if r1 < r0 or c1 < c0:
        return np.zeros((0, 2), dtype=np.int64)
    rr, cc = np.mgrid[r0:r1 + 1, c0:c1 + 1]
    q = np.stack([cc.ravel() - o[0], -rr.ravel() - o[1]], axis=1)
    det = Lv[0] * W[1] - Lv[1] * W[0]
    if abs(det) < 1e-12:
        return np.zeros((0, 2), dtype=np.int64)
    s = (q[:, 0] * W[1] - q[:, 1] * W[0]) / det
    t = (Lv[0] * q[:, 1] - Lv[1] * q[:, 0]) / det
    inside = (s >= -_EPS) & (s < 1 - _EPS) & (t > _EPS) & (t <= 1 + _EPS)
    return np.stack([rr.ravel()[inside], cc.ravel()[inside]], axis=1).astype(np.int64)


def build_mask(L: LineSegment, w: float, gamma: float, shape: tuple[int, int] | None = None,
               centered: bool = False) -> Mask:
    """Rasterised parallelogram mask h(L, (w, gamma)).

    With ``centered`` the band straddles the segment (t in (-1/2, 1/2]); this
    is how the one-pixel on-edge mask is realised.
    """
    if w < 1 and not centered:
        raise FeatureError("mask width must be >= 1 pixel")
    if L.length <= 0:
        raise FeatureError("mask needs a segment of positive length")
    corners = parallelogram(L, w, gamma, centered)
    return Mask(L, w, gamma, rasterize_parallelogram(corners, shape), corners)


def h0(L, shape):
    return build_mask(L, 1, 90.0, shape, centered=True)


def h_pos(L, w0, shape):
    return build_mask(L, w0, 90.0, shape)


def h_neg(L, w0, shape):
    return build_mask(L, w0, -90.0, shape)


# ------------------------------------------------------------------------
# classification

@dataclass
class FeaturedSegment:
    segment: LineSegment
    label: EdgeLabel
    mean_depth_pos: float
    mean_depth_neg: float
    mean_depth_on: float | None = None
    id: int = -1
    dd_votes: int = 0
    cd_votes: int = 0
    source: LineSegment | None = None   # geometry before pixel relocation

    @property
    def angle(self) -> float:
        return segment_angle(self.segment)

    @property
    def object_depth(self) -> float:
        """Depth of the surface a finger would touch at this edge."""
        if self.label.is_dd:
            return min(self.mean_depth_pos, self.mean_depth_neg)
        if self.mean_depth_on is not None:
            return self.mean_depth_on
        return 0.5 * (self.mean_depth_pos + self.mean_depth_neg)

    def wrench_normals(self) -> list[np.ndarray]:
        """Image-plane unit normals pointing to where a finger can push from
        this edge into the object (one for DD, two for convex CD)."""
        n = self.segment.normal()
        if self.label is EdgeLabel.DD_NEG:
            return [n]
        if self.label is EdgeLabel.DD_POS:
            return [-n]
        if self.label is EdgeLabel.CD_BOTH:
            return [n, -n]
        return []

    def object_normal(self) -> np.ndarray:
        if not self.label.is_dd:
            raise FeatureError("only DD edges have a foreground side")
        return self.wrench_normals()[0]


def _masked_mean(mask: Mask, img: DepthImage, min_valid_fraction: float) -> float | None:
    if mask.empty:
        return None
    ok = img.valid[mask.covered[:, 0], mask.covered[:, 1]]
    if ok.sum() == 0 or ok.mean() < min_valid_fraction:
        return None
    return float(mask.values(img.depth)[ok].mean())


def classify_edge(L: LineSegment, img: DepthImage, grad: GradientField | None, dd_img: np.ndarray,
                  cd_img: np.ndarray, w0: int = 5, min_valid_fraction: float = 0.3,
                  vote_dilation: int = 1) -> FeaturedSegment | None:
    """Label a segment as DD-, DD+, CD+- or CD0; None when the side masks
    hold too little valid depth to decide."""
    shape = img.depth.shape
    on = h0(L, shape)
    if on.empty:
        log.debug("segment %s outside image", L.p_start)
        return None
    dd = dd_img
    cd = cd_img
    if vote_dilation > 0:
        dd = ndimage.binary_dilation(dd_img, iterations=vote_dilation, structure=np.ones((3, 3), bool))
        cd = ndimage.binary_dilation(cd_img, iterations=vote_dilation, structure=np.ones((3, 3), bool))
    dd_votes = int(on.values(dd).sum())
    cd_votes = int(on.values(cd).sum())
    if dd_votes == 0 and cd_votes == 0:
        log.debug("segment %s overlaps neither detection image", L.p_start)
        return None
    pos = _masked_mean(h_pos(L, w0, shape), img, min_valid_fraction)
    neg = _masked_mean(h_neg(L, w0, shape), img, min_valid_fraction)
    if pos is None or neg is None:
        log.info("unclassifiable segment at %s: side masks lack valid depth", L.p_start)
        return None
    mid = _masked_mean(on, img, 0.0)
    if dd_votes >= cd_votes:
        label = EdgeLabel.DD_NEG if pos < neg else EdgeLabel.DD_POS
    else:
        if mid is None:
            return None
        label = EdgeLabel.CD_BOTH if 0.5 * (pos + neg) > mid else EdgeLabel.CD_NONE
    return FeaturedSegment(L, label, pos, neg, mid, dd_votes=dd_votes, cd_votes=cd_votes)


def classify_segments(segments, img, grad, dd_img, cd_img, w0=5, min_valid_fraction=0.3):
    out = []
    for L in segments:
        fs = classify_edge(L, img, grad, dd_img, cd_img, w0, min_valid_fraction)
        if fs is not None:
            out.append(fs)
    return out


# ------------------------------------------------------------------------
# practical fixes

def _xy_dir_to_rc(v) -> np.ndarray:
    return np.array([-v[1], v[0]])


def relocate_dd_pixels(seg: FeaturedSegment, grad: GradientField, width: int = 7,
                       margin: float = 2.0) -> FeaturedSegment:
    """Move DD edge pixels that sit on the background side of the depth-gradient
    peak across it onto the foreground object.

    For each member pixel the gradient magnitude is sampled along the segment
    normal within +-``width`` pixels; the peak position is the mean offset of
    the (tied) maxima. Pixels not clearly on the foreground side of the peak
    are moved ``floor(peak + margin)`` pixels toward the foreground.
    """
    if not seg.label.is_dd:
        raise FeatureError("pixel relocation applies to DD edges only")
    px = seg.segment.member_pixels
    if len(px) == 0:
        return seg
    n_xy = seg.object_normal()
    n_rc = _xy_dir_to_rc(n_xy)
    h, w = grad.magnitude.shape
    ks = np.arange(-width, width + 1)
    samp = np.rint(px[:, None, :] + ks[None, :, None] * n_rc[None, None, :]).astype(np.int64)
    inb = (samp[..., 0] >= 0) & (samp[..., 0] < h) & (samp[..., 1] >= 0) & (samp[..., 1] < w)
    sr = np.clip(samp[..., 0], 0, h - 1)
    sc = np.clip(samp[..., 1], 0, w - 1)
    mag = np.where(inb, grad.magnitude[sr, sc], -np.inf)
    peak = mag.max(axis=1, keepdims=True)
    tied = mag >= peak * (1 - 1e-9) - 1e-15
    offset = (tied * ks[None, :]).sum(axis=1) / tied.sum(axis=1)
    move = offset > -0.25
    shift = np.where(move, np.floor(offset + margin), 0.0)
    new_px = np.rint(px + shift[:, None] * n_rc[None, :]).astype(np.int64)
    new_px[:, 0] = np.clip(new_px[:, 0], 0, h - 1)
    new_px[:, 1] = np.clip(new_px[:, 1], 0, w - 1)
    _, first = np.unique(new_px[:, 0] * w + new_px[:, 1], return_index=True)
    new_px = new_px[np.sort(first)]
    disp = float(np.mean(((rc_to_xy(new_px).mean(axis=0) - rc_to_xy(px).mean(axis=0)) @ n_xy)))
    L = seg.segment
    moved = LineSegment(L.p_start + disp * n_xy, L.p_end + disp * n_xy, new_px)
    return replace(seg, segment=moved, source=seg.source or L)


def _side_profiles(L: LineSegment, img: DepthImage, grad: GradientField, w0: int):
    """Per member pixel: median depth and circular-mean direction on each side."""
    px = L.member_pixels
    n_rc = _xy_dir_to_rc(L.normal())
    h, w = img.depth.shape
    out = {}
    for name, sgn in (("pos", 1), ("neg", -1)):
        ks = sgn * np.arange(1, w0 + 1)
        samp = np.rint(px[:, None, :] + ks[None, :, None] * n_rc[None, None, :]).astype(np.int64)
        inb = (samp[..., 0] >= 0) & (samp[..., 0] < h) & (samp[..., 1] >= 0) & (samp[..., 1] < w)
        sr = np.clip(samp[..., 0], 0, h - 1)
        sc = np.clip(samp[..., 1], 0, w - 1)
        ok = inb & img.valid[sr, sc]
        d = np.where(ok, img.depth[sr, sc], np.nan)
        th = grad.direction[sr, sc]
        with np.errstate(all="ignore"):
            out[name] = np.nanmedian(d, axis=1)
            out[name + "_th"] = np.arctan2(np.nansum(np.where(ok, np.sin(th), np.nan), axis=1),
                                           np.nansum(np.where(ok, np.cos(th), np.nan), axis=1))
    return out


def _windowed_jump(x: np.ndarray, k: int, circular: bool = False) -> np.ndarray:
    """|median(after) - median(before)| with windows of ``k`` samples, per split index."""
    n = len(x)
    jumps = np.zeros(n)
    for i in range(k, n - k + 1):
        a, b = x[i - k:i], x[i:i + k]
        if circular:
            ma = math.atan2(np.nanmean(np.sin(a)), np.nanmean(np.cos(a)))
            mb = math.atan2(np.nanmean(np.sin(b)), np.nanmean(np.cos(b)))
            jumps[i] = abs((mb - ma + math.pi) % (2 * math.pi) - math.pi)
        else:
            with np.errstate(all="ignore"):
                jumps[i] = abs(np.nanmedian(b) - np.nanmedian(a))
    return np.nan_to_num(jumps)


def split_ambiguous(seg: FeaturedSegment, img: DepthImage, grad: GradientField, dd_img: np.ndarray,
                    cd_img: np.ndarray, dd_threshold: float = 0.015, cd_threshold: float = 0.35,
                    w0: int = 5, min_len: float = 8.0, window: int = 3, max_depth: int = 4,
                    vote_dilation: int = 1) -> list[FeaturedSegment]:
    """Break a segment where depth or direction changes abruptly along it.

    Along the member pixels, the side depths, the depth difference across the
    edge and the side gradient directions are profiled; the largest jump above
    threshold, at least ``min_len`` pixels from either end, becomes a split
    point and both halves are classified again.
    """
    L = seg.segment
    px = L.member_pixels
    n = len(px)
    if max_depth <= 0 or n < 2 * max(int(min_len), window) + 1:
        return [seg]
    prof = _side_profiles(L, img, grad, w0)
    score = np.zeros(n)
    for key in ("pos", "neg"):
        score = np.maximum(score, _windowed_jump(prof[key], window) / dd_threshold)
    score = np.maximum(score, _windowed_jump(prof["pos"] - prof["neg"], window) / dd_threshold)
    for key in ("pos_th", "neg_th"):
        score = np.maximum(score, _windowed_jump(prof[key], window, circular=True) / cd_threshold)
    pts = rc_to_xy(px)
    along = (pts - pts[0]) @ ((pts[-1] - pts[0]) / max(np.linalg.norm(pts[-1] - pts[0]), 1e-12))
    valid_cut = (along >= min_len) & (along <= along[-1] - min_len)
    score[~valid_cut] = 0.0
    i = int(np.argmax(score))
    if score[i] <= 1.0:
        return [seg]
    out = []
    for part in (px[:i], px[i:]):
        sub = LineSegment(rc_to_xy(part[0]), rc_to_xy(part[-1]), part)
        if sub.length < min_len:
            continue
        fs = classify_edge(sub, img, grad, dd_img, cd_img, w0, vote_dilation=vote_dilation)
        if fs is None:
            continue
        out.extend(split_ambiguous(fs, img, grad, dd_img, cd_img, dd_threshold, cd_threshold, w0,
                                   min_len, window, max_depth - 1, vote_dilation))
    log.debug("split segment at %s into %d parts", L.p_start, len(out))
    return out
