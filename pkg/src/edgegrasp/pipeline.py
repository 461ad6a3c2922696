"""End-to-end planning: depth image -> ranked grasp candidates."""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from . import __version__, kernels
from .camera import CameraModel
from .config import PipelineConfig
from .edges import detect_cd_edges, detect_dd_edges, merge_edges, morphological_cleanup
from .features import FeaturedSegment, classify_edge, relocate_dd_pixels, split_ambiguous
from .grasp3d import (DegenerateGeometryError, DegeneratePlaneError, GraspCandidate, InsufficientSupportError,
                      backproject, fit_plane_ransac, grasp_parameters, rank_candidates, score_candidate,
                      width_check)
from .imaging import DepthImage, GradientField, compute_gradients, fill_shadows
from .pairing import CandidatePair, PairingGate, enumerate_pairs
from .segments import extract_segments

log = logging.getLogger(__name__)

STAGES = ("depth", "filled", "gradient", "dd", "cd", "edges", "segments", "features", "pairs", "candidates")


class PipelineError(RuntimeError):
    def __init__(self, stage: str, exc: Exception):
        super().__init__(f"[{stage}] {exc}")
        self.stage = stage
        self.cause = exc


@dataclass
class PipelineResult:
    config: PipelineConfig
    seed: int
    depth: DepthImage
    filled: DepthImage | None = None
    grad_raw: GradientField | None = None
    dd: np.ndarray | None = None
    cd: np.ndarray | None = None
    edges: np.ndarray | None = None
    segments: list = field(default_factory=list)
    features: list[FeaturedSegment] = field(default_factory=list)
    pairs: list[CandidatePair] = field(default_factory=list)
    candidates: list[GraspCandidate] = field(default_factory=list)
    stats: dict = field(default_factory=dict)
    rejections: dict = field(default_factory=dict)


def camera_from_config(cfg: PipelineConfig) -> CameraModel:
    c = cfg.camera
    return CameraModel(c.fx, c.fy, c.cx, c.cy)


def _stage(name):
    def deco(fn):
        def run(*a, **k):
            try:
                return fn(*a, **k)
            except PipelineError:
                raise
            except Exception as exc:  # tag and re-raise
                raise PipelineError(name, exc) from exc
        return run
    return deco


@_stage("imaging")
def _imaging(img, cfg):
    ic = cfg.imaging
    filled = fill_shadows(img, ic.shadow_window, ic.shadow_max_passes)
    raw = compute_gradients(filled, ic.gradient_stencil, 0.0)
    smooth = compute_gradients(filled, ic.gradient_stencil, ic.smooth_sigma)
    return filled, raw, smooth


@_stage("edges")
def _edges(filled, smooth, cfg):
    ec = cfg.edges
    dd = detect_dd_edges(filled, smooth, ec.dd_low, ec.dd_high)
    # orientation smoothing must not reach across depth steps
    barrier = ndimage.binary_dilation(dd, structure=np.ones((3, 3), bool))
    cdg = compute_gradients(filled, cfg.imaging.gradient_stencil, ec.cd_smooth_sigma, barrier=barrier)
    cd = detect_cd_edges(cdg, ec.cd_low, ec.cd_high, ec.cd_min_gradient, depth_edges=dd)
    merged = morphological_cleanup(merge_edges(dd, cd), ec.close_size, ec.min_speck)
    return dd, cd, merged, cdg


@_stage("features")
def _features(segs, filled, raw, cdg, dd, cd, cfg):
    fc, ec = cfg.features, cfg.edges
    out = []
    # vote images are dilated once here rather than per segment
    k = np.ones((3, 3), bool)
    dd = ndimage.binary_dilation(dd, structure=k)
    cd = ndimage.binary_dilation(cd, structure=k)
    for L in segs:
        fs = classify_edge(L, filled, raw, dd, cd, fc.w0, fc.min_valid_fraction, vote_dilation=0)
        if fs is None:
            continue
        parts = split_ambiguous(fs, filled, cdg, dd, cd, ec.dd_high, ec.cd_high, fc.w0, cfg.segments.min_len,
                                vote_dilation=0)
        for p in parts:
            if p.label.is_dd:
                p = relocate_dd_pixels(p, raw, fc.relocation_width, fc.relocation_margin)
            out.append(p)
    for i, fs in enumerate(out):
        fs.id = i
    return out


def _region_points(region, img, cam):
    return backproject(region.sub_segment.member_pixels, img, cam)


@_stage("grasp3d")
def _grasps(pairs, depth, cfg, cam, seed, rejections):
    g, rc, rk = cfg.gripper, cfg.ransac, cfg.ranking
    out = []

    def reject(reason):
        rejections[reason] = rejections.get(reason, 0) + 1

    for k, p in enumerate(pairs):
        Pi, _ = _region_points(p.a, depth, cam)
        Pj, _ = _region_points(p.b, depth, cam)
        if len(Pi) == 0 or len(Pj) == 0:
            reject("no_valid_depth")
            continue
        pts = np.concatenate([Pi, Pj])
        try:
            plane = fit_plane_ransac(pts, rc.t_max, rc.iterations, [seed, p.ia, p.ib, k], rc.min_inliers)
        except (DegeneratePlaneError, InsufficientSupportError):
            reject("no_plane")
            continue
        inl_i, inl_j = plane.inliers[:len(Pi)], plane.inliers[len(Pi):]
        if inl_i.mean() < rc.min_side_fraction or inl_j.mean() < rc.min_side_fraction:
            reject("two_planes")
            continue
        Qi, Qj = Pi[inl_i], Pj[inl_j]
        if not width_check(Qi.mean(axis=0), Qj.mean(axis=0), g.eps_min, g.eps_max):
            reject("width")
            continue
        try:
            cand = grasp_parameters((Qi, Qj), plane, g.eps_d, g.eps_max)
            cand.check(g.eps_min, g.eps_max, g.eps_d)
        except DegenerateGeometryError:
            reject("degenerate")
            continue
        length = p.a.length + p.b.length
        cand.score = score_candidate(length, plane, rk.w_length, rk.w_inlier, rk.w_rms)
        cand.provenance = {
            "pair": k,
            "segments": [p.a.parent.id, p.b.parent.id],
            "labels": [p.a.parent.label.value, p.b.parent.label.value],
            "beta": p.beta,
            "p_f": [float(v) for v in p.p_f],
            "regions": [_region_json(p.a), _region_json(p.b)],
            "plane": {"normal": plane.normal.tolist(), "offset": plane.offset, "rms": plane.rms,
                      "inlier_ratio": plane.inlier_ratio},
        }
        out.append(cand)
    return rank_candidates(out, rk.dedup_distance, rk.dedup_angle_deg)


def _region_json(r):
    s = r.sub_segment
    return {"start": [float(v) for v in s.p_start], "end": [float(v) for v in s.p_end],
            "length": float(s.length), "side": r.side}


def run_pipeline(img: DepthImage, cfg: PipelineConfig | None = None, seed: int | None = None,
                 stop_after: str | None = None, unconstrained: bool = False) -> PipelineResult:
    """Run every stage; ``stop_after`` ends early at a named stage.

    ``unconstrained`` turns off the pair search limits (distance gate and the
    gripper-derived projection width), as used by the detection evaluation.
    """
    cfg = (cfg or PipelineConfig()).validate()
    seed = cfg.ransac.seed if seed is None else int(seed)
    cam = camera_from_config(cfg)
    res = PipelineResult(cfg, seed, img)
    res.filled, raw, smooth = _imaging(img, cfg)
    res.grad_raw = raw
    if stop_after in ("depth", "filled", "gradient"):
        return res
    res.dd, res.cd, res.edges, cdg = _edges(res.filled, smooth, cfg)
    res.stats["edge_pixels"] = {"dd": int(res.dd.sum()), "cd": int(res.cd.sum()), "merged": int(res.edges.sum())}
    if stop_after in ("dd", "cd", "edges"):
        return res
    try:
        res.segments = extract_segments(res.edges, cfg.segments.dev_tol, cfg.segments.min_len)
    except Exception as exc:
        raise PipelineError("segments", exc) from exc
    res.stats["segments"] = len(res.segments)
    if stop_after == "segments":
        return res
    res.features = _features(res.segments, res.filled, raw, cdg, res.dd, res.cd, cfg)
    res.stats["features"] = {lab: sum(1 for f in res.features if f.label.value == lab)
                             for lab in ("DD-", "DD+", "CD+-", "CD0")}
    if stop_after == "features":
        return res
    try:
        if unconstrained:
            gate = PairingGate(cfg.gripper.eps_max, gate=False)
            res.pairs = enumerate_pairs(res.features, cfg.friction.alpha_f, cam, gate,
                                        w_max=float(math.hypot(*img.depth.shape)))
        else:
            gate = PairingGate(cfg.gripper.eps_max, cfg.pairing.gate, cfg.pairing.gate_factor)
            res.pairs = enumerate_pairs(res.features, cfg.friction.alpha_f, cam, gate)
    except Exception as exc:
        raise PipelineError("pairing", exc) from exc
    res.stats["pairs"] = len(res.pairs)
    if stop_after == "pairs":
        return res
    res.candidates = _grasps(res.pairs, img, cfg, cam, seed, res.rejections)
    res.stats["candidates"] = len(res.candidates)
    res.stats["rejections"] = dict(sorted(res.rejections.items()))
    return res


# ------------------------------------------------------------------------
# report

def _f(x) -> float:
    return float(x)


def candidate_json(c: GraspCandidate) -> dict:
    return {
        "P_G": [_f(v) for v in c.P_G],
        "R_G": [_f(v) for v in c.R_G.ravel()],
        "V_G": [_f(v) for v in c.V_G],
        "V_c": [_f(v) for v in c.V_c],
        "V_R": [_f(v) for v in c.V_R],
        "contacts": [[_f(v) for v in c.contacts[0]], [_f(v) for v in c.contacts[1]]],
        "theta_G": {"pre_contact": _f(c.theta_G[0]), "contact": _f(c.theta_G[1])},
        "width": _f(c.width),
        "score": _f(c.score),
        **{k: v for k, v in c.provenance.items()},
    }


def report(res: PipelineResult, source: str | None = None) -> dict:
    reasons = []
    if not res.candidates:
        if not res.features:
            reasons.append("no_features")
        elif not res.pairs:
            reasons.append("no_pairs")
        else:
            reasons.extend(sorted(res.rejections))
    return {
        "metadata": {"tool": "edgegrasp", "version": __version__, "config_hash": res.config.digest(),
                     "seed": res.seed, "source": source, "backend": kernels.BACKEND,
                     "image": {"height": res.depth.height, "width": res.depth.width}},
        "candidates": [dict(candidate_json(c), id=i) for i, c in enumerate(res.candidates)],
        "stats": res.stats,
        "reasons": reasons,
    }


def dumps(doc: dict) -> str:
    return json.dumps(doc, indent=2, sort_keys=True, allow_nan=False) + "\n"
