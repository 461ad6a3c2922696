"""Debug images: depth shading with detected edges or contact regions drawn on top."""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image, ImageDraw

from .features import EdgeLabel, FeaturedSegment
from .imaging import DepthImage

LABEL_COLORS = {
    EdgeLabel.DD_NEG: (255, 60, 60),
    EdgeLabel.DD_POS: (255, 170, 40),
    EdgeLabel.CD_BOTH: (60, 200, 255),
    EdgeLabel.CD_NONE: (150, 150, 150),
}


def depth_to_gray(img: DepthImage) -> np.ndarray:
    """8-bit gray image, near = bright; invalid pixels are black."""
    out = np.zeros(img.depth.shape, np.uint8)
    if img.valid.any():
        d = img.depth[img.valid]
        lo, hi = float(d.min()), float(d.max())
        span = hi - lo if hi > lo else 1.0
        out[img.valid] = np.clip(255 - 215 * (d - lo) / span, 0, 255).astype(np.uint8)
    return out


def mask_to_image(mask: np.ndarray) -> Image.Image:
    return Image.fromarray(np.where(mask, 255, 0).astype(np.uint8), mode="L")


def _canvas(img: DepthImage) -> Image.Image:
    return Image.fromarray(depth_to_gray(img), mode="L").convert("RGB")


def _xy(p):
    # image-plane (x, y=-row) to PIL (col, row)
    return float(p[0]), float(-p[1])


def segments_image(img: DepthImage, segments, seed: int = 0) -> Image.Image:
    """Each line segment in its own random colour."""
    im = _canvas(img)
    dr = ImageDraw.Draw(im)
    rng = np.random.default_rng(seed)
    for L in segments:
        col = tuple(int(v) for v in rng.integers(60, 256, 3))
        dr.line([_xy(L.p_start), _xy(L.p_end)], fill=col, width=1)
    return im


def edges_image(img: DepthImage, features: list[FeaturedSegment]) -> Image.Image:
    """Classified segments coloured by label, with a tick on the object side of DD edges."""
    im = _canvas(img)
    dr = ImageDraw.Draw(im)
    for fs in features:
        L = fs.segment
        col = LABEL_COLORS[fs.label]
        dr.line([_xy(L.p_start), _xy(L.p_end)], fill=col, width=2)
        if fs.label.is_dd:
            m = L.midpoint
            dr.line([_xy(m), _xy(m + 4 * fs.object_normal())], fill=col, width=1)
    return im


def pairs_image(img: DepthImage, pairs, limit: int | None = None) -> Image.Image:
    """Overlap areas in translucent green, contact regions in red and blue."""
    base = _canvas(img).convert("RGBA")
    layer = Image.new("RGBA", base.size, (0, 0, 0, 0))
    dr = ImageDraw.Draw(layer)
    for p in pairs[:limit]:
        poly = [_xy(v) for v in np.asarray(p.overlap.exterior.coords)]
        dr.polygon(poly, fill=(40, 220, 90, 50), outline=(40, 220, 90, 160))
    for p in pairs[:limit]:
        for r, col in ((p.a, (255, 50, 50, 255)), (p.b, (60, 110, 255, 255))):
            s = r.sub_segment
            dr.line([_xy(s.p_start), _xy(s.p_end)], fill=col, width=3)
    return Image.alpha_composite(base, layer).convert("RGB")


def truth_image(img: DepthImage, truth) -> Image.Image:
    """Ground-truth edges: DD red, convex CD cyan, concave CD gray."""
    im = _canvas(img)
    dr = ImageDraw.Draw(im)
    cols = {"DD": (255, 60, 60), "CD": (60, 200, 255), "CD0": (150, 150, 150)}
    for e in truth.edges:
        dr.line([_xy(p) for p in e.points], fill=cols[e.kind], width=1)
    return im


def write_overlays(out_dir, img: DepthImage, result, stem: str = "overlay") -> list[Path]:
    """Write the standard overlay set for a pipeline result; returns the paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for name, im in (("segments", segments_image(img, result.segments)),
                     ("edges", edges_image(img, result.features)),
                     ("pairs", pairs_image(img, result.pairs))):
        p = out / f"{stem}_{name}.png"
        im.save(p)
        paths.append(p)
    return paths
