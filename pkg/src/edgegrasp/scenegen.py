"""Analytic tabletop scenes: ray-cast depth plus ground-truth graspable edges.

World frame has the table at ``z = table_z`` with z up. Boxes stand on the
table with a yaw about z; cylinders stand upright. Ground truth is computed
from the primitives in the same view the depth is rendered from:

* an edge between two camera-facing faces is a convex CD edge,
* an edge between a camera-facing and a back-facing face is a silhouette,
  i.e. a DD edge whose object side is the visible face,
* an edge where a camera-facing face meets the table is concave (CD0) and is
  kept for reference but is not graspable.

Edges are clipped to their unoccluded, in-image parts.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import kernels
from .camera import CameraModel, look_at
from .imaging import DepthImage
from .kernels._common import CYL_CAP, CYL_SIDE, MISS


class SceneError(ValueError):
    """Invalid scene description."""


@dataclass(frozen=True)
class Box:
    center: tuple[float, float]
    size: tuple[float, float, float]
    yaw: float = 0.0  # degrees

    def rotation(self) -> np.ndarray:
        a = math.radians(self.yaw)
        c, s = math.cos(a), math.sin(a)
        return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


@dataclass(frozen=True)
class Cylinder:
    center: tuple[float, float]
    radius: float
    height: float


@dataclass
class SceneSpec:
    camera: CameraModel = field(default_factory=CameraModel.kinect)
    position: tuple[float, float, float] = (0.0, -0.5, 0.75)
    target: tuple[float, float, float] = (0.0, 0.2, 0.0)
    width: int = 640
    height: int = 480
    table_z: float = 0.0
    boxes: list[Box] = field(default_factory=list)
    cylinders: list[Cylinder] = field(default_factory=list)
    noise_sigma: float = 0.0
    seed: int = 0
    name: str = "scene"

    @property
    def rotation(self) -> np.ndarray:
        return look_at(self.position, self.target)

    @property
    def n_objects(self) -> int:
        return len(self.boxes) + len(self.cylinders)

    def with_noise(self, sigma: float, seed: int | None = None) -> "SceneSpec":
        from dataclasses import replace
        return replace(self, noise_sigma=sigma, seed=self.seed if seed is None else seed)

    def validate(self) -> "SceneSpec":
        if self.width < 2 or self.height < 2:
            raise SceneError("image must be at least 2x2")
        if self.noise_sigma < 0:
            raise SceneError("noise sigma must be non-negative")
        p = np.asarray(self.position, dtype=float)
        if p[2] <= self.table_z:
            raise SceneError("camera must be above the table")
        for b in self.boxes:
            if min(b.size) <= 0:
                raise SceneError(f"box extents must be positive: {b.size}")
            local = b.rotation().T @ (p - np.array([b.center[0], b.center[1], self.table_z + b.size[2] / 2]))
            if np.all(np.abs(local) <= np.asarray(b.size) / 2):
                raise SceneError("camera is inside a box")
        for c in self.cylinders:
            if c.radius <= 0 or c.height <= 0:
                raise SceneError("cylinder radius and height must be positive")
            if (math.hypot(p[0] - c.center[0], p[1] - c.center[1]) <= c.radius
                    and self.table_z <= p[2] <= self.table_z + c.height):
                raise SceneError("camera is inside a cylinder")
        return self

    # ---- plain-text form --------------------------------------------------

    @classmethod
    def from_ini(cls, text: str, name: str = "scene") -> "SceneSpec":
        cp = configparser.ConfigParser()
        try:
            cp.read_string(text)
        except configparser.Error as exc:
            raise SceneError(f"malformed scene file: {exc}") from exc

        def vec(sec, key, n, default=None):
            if not cp.has_option(sec, key):
                if default is None:
                    raise SceneError(f"missing {sec}.{key}")
                return default
            vals = tuple(float(v) for v in cp.get(sec, key).replace(",", " ").split())
            if len(vals) != n:
                raise SceneError(f"{sec}.{key} needs {n} numbers")
            return vals

        try:
            spec = cls(name=cp.get("scene", "name", fallback=name))
            if cp.has_section("scene"):
                s = cp["scene"]
                spec.width = s.getint("width", spec.width)
                spec.height = s.getint("height", spec.height)
                spec.noise_sigma = s.getfloat("noise_sigma", spec.noise_sigma)
                spec.seed = s.getint("seed", spec.seed)
            if cp.has_section("camera"):
                c = cp["camera"]
                spec.camera = CameraModel(c.getfloat("fx", 525.0), c.getfloat("fy", 525.0),
                                          c.getfloat("cx", 319.5), c.getfloat("cy", 239.5))
                spec.position = vec("camera", "position", 3, spec.position)
                spec.target = vec("camera", "target", 3, spec.target)
            if cp.has_section("table"):
                spec.table_z = cp["table"].getfloat("z", 0.0)
            for sec in cp.sections():
                if sec.startswith("box"):
                    spec.boxes.append(Box(vec(sec, "center", 2), vec(sec, "size", 3),
                                          cp[sec].getfloat("yaw", 0.0)))
                elif sec.startswith("cylinder"):
                    spec.cylinders.append(Cylinder(vec(sec, "center", 2), cp[sec].getfloat("radius"),
                                                   cp[sec].getfloat("height")))
                elif sec not in ("scene", "camera", "table"):
                    raise SceneError(f"unknown scene section [{sec}]")
        except (TypeError, ValueError) as exc:
            if isinstance(exc, SceneError):
                raise
            raise SceneError(f"bad scene value: {exc}") from exc
        return spec.validate()

    @classmethod
    def load(cls, path) -> "SceneSpec":
        path = Path(path)
        return cls.from_ini(path.read_text(), name=path.stem)

    def to_ini(self) -> str:
        lines = ["[scene]", f"name = {self.name}", f"width = {self.width}", f"height = {self.height}",
                 f"noise_sigma = {self.noise_sigma!r}", f"seed = {self.seed}", "",
                 "[camera]", f"fx = {self.camera.fx!r}", f"fy = {self.camera.fy!r}",
                 f"cx = {self.camera.cx!r}", f"cy = {self.camera.cy!r}",
                 "position = " + ", ".join(repr(float(v)) for v in self.position),
                 "target = " + ", ".join(repr(float(v)) for v in self.target), "",
                 "[table]", f"z = {self.table_z!r}", ""]
        for i, b in enumerate(self.boxes):
            lines += [f"[box.{i + 1}]", "center = " + ", ".join(map(repr, map(float, b.center))),
                      "size = " + ", ".join(map(repr, map(float, b.size))), f"yaw = {float(b.yaw)!r}", ""]
        for i, c in enumerate(self.cylinders):
            lines += [f"[cylinder.{i + 1}]", "center = " + ", ".join(map(repr, map(float, c.center))),
                      f"radius = {float(c.radius)!r}", f"height = {float(c.height)!r}", ""]
        return "\n".join(lines)


@dataclass
class TruthEdge:
    """A ground-truth depth edge as an image polyline.

    ``points`` are (x, y) image-plane coordinates with x = column and
    y = -row. ``into`` maps each adjacent visible surface key to per-point
    unit vectors pointing from the edge into that surface.
    """

    id: int
    object_id: int
    kind: str                       # "DD", "CD" (convex) or "CD0" (concave)
    points: np.ndarray
    into: dict[tuple[int, int], np.ndarray]
    points3d: np.ndarray

    @property
    def graspable(self) -> bool:
        return self.kind in ("DD", "CD")

    @property
    def object_side(self) -> np.ndarray | None:
        """For DD edges, per-point 2-D unit normals toward the occluding object."""
        if self.kind != "DD":
            return None
        return next(iter(self.into.values()))

    def length(self) -> float:
        return float(np.sum(np.linalg.norm(np.diff(self.points, axis=0), axis=1)))


@dataclass
class TruthSurface:
    key: tuple[int, int]            # (object id, face id)
    edge_ids: list[int]
    pixels: np.ndarray              # bool mask (h, w)
    graspable: bool = False


@dataclass
class GroundTruth:
    edges: list[TruthEdge]
    surfaces: list[TruthSurface]
    objects: list[int]
    object_map: np.ndarray          # per pixel object id (-1 table, -2 miss)
    face_map: np.ndarray
    points3d: np.ndarray            # camera-frame hit points, noise free

    @property
    def graspable_edges(self) -> list[TruthEdge]:
        return [e for e in self.edges if e.graspable]


# ------------------------------------------------------------------------
# ray casting

def _primitive_arrays(spec: SceneSpec, skip: int | None = None):
    nb = len(spec.boxes)
    boxes = [(i, b) for i, b in enumerate(spec.boxes) if i != skip]
    cyls = [(nb + i, c) for i, c in enumerate(spec.cylinders) if nb + i != skip]
    box_rot = np.array([b.rotation() for _, b in boxes]).reshape(-1, 3, 3)
    box_center = np.array([[b.center[0], b.center[1], spec.table_z + b.size[2] / 2] for _, b in boxes]).reshape(-1, 3)
    box_half = np.array([np.asarray(b.size) / 2 for _, b in boxes]).reshape(-1, 3)
    cyl_base = np.array([[c.center[0], c.center[1], spec.table_z] for _, c in cyls]).reshape(-1, 3)
    cyl_r = np.array([c.radius for _, c in cyls], dtype=np.float64)
    cyl_h = np.array([c.height for _, c in cyls], dtype=np.float64)
    ids = np.array([i for i, _ in boxes] + [i for i, _ in cyls], dtype=np.int64)
    return (box_rot, box_center, box_half, cyl_base, cyl_r, cyl_h), ids


def _cast(spec: SceneSpec, dirs_world: np.ndarray, skip: int | None = None):
    arrays, ids = _primitive_arrays(spec, skip)
    origin = np.asarray(spec.position, dtype=np.float64)
    t, obj, face = kernels.raycast(np.ascontiguousarray(dirs_world), origin, *arrays, float(spec.table_z))
    obj = np.where(obj >= 0, ids[np.clip(obj, 0, max(len(ids) - 1, 0))] if len(ids) else obj, obj)
    return t, obj, face


def render(spec: SceneSpec) -> tuple[DepthImage, GroundTruth]:
    """Ray-cast the scene; returns the (optionally noisy) depth and ground truth."""
    spec.validate()
    h, w = spec.height, spec.width
    R = spec.rotation
    rays_c = spec.camera.rays(h, w).reshape(-1, 3)
    rays_w = rays_c @ R.T
    t, obj, face = _cast(spec, rays_w)
    hit = obj != MISS
    depth = np.where(hit, t, 0.0).reshape(h, w)
    points = (rays_c * np.where(hit, t, 0.0)[:, None]).reshape(h, w, 3)
    valid = hit.reshape(h, w)
    if spec.noise_sigma > 0:
        rng = np.random.default_rng(spec.seed)
        depth = depth + rng.normal(0.0, spec.noise_sigma, size=depth.shape)
        valid &= depth > 0
    img = DepthImage(np.where(valid, depth, 0.0), valid)
    truth = _ground_truth(spec, obj.reshape(h, w), face.reshape(h, w), points)
    return img, truth


# ------------------------------------------------------------------------
# ground truth

def _to_camera(spec: SceneSpec, pw: np.ndarray) -> np.ndarray:
    return (np.atleast_2d(pw) - np.asarray(spec.position)) @ spec.rotation


def _image_xy(spec: SceneSpec, pc: np.ndarray) -> np.ndarray:
    rc = spec.camera.project(pc)
    return np.stack([rc[:, 1], -rc[:, 0]], axis=1)


def _visible(spec: SceneSpec, obj_id: int, pw: np.ndarray, margin: float = 3.0) -> np.ndarray:
    """Sample points of object ``obj_id`` that no other object hides and that
    project inside the image (with ``margin`` pixels to spare)."""
    pc = _to_camera(spec, pw)
    rc = spec.camera.project(pc)
    inside = ((pc[:, 2] > 0) & (rc[:, 0] >= margin) & (rc[:, 0] <= spec.height - 1 - margin)
              & (rc[:, 1] >= margin) & (rc[:, 1] <= spec.width - 1 - margin))
    dirs_c = pc / pc[:, 2:3]
    t, obj, _ = _cast(spec, dirs_c @ spec.rotation.T, skip=obj_id)
    unoccluded = ~((obj >= 0) & (t < pc[:, 2] - 1e-9))
    return inside & unoccluded


def _sample_count(spec: SceneSpec, a: np.ndarray, b: np.ndarray, px: float = 1.0) -> int:
    xy = _image_xy(spec, _to_camera(spec, np.stack([a, b])))
    return max(2, int(math.ceil(np.linalg.norm(xy[1] - xy[0]) / px)) + 1)


class _EdgeBuilder:
    def __init__(self, spec: SceneSpec, min_px: float):
        self.spec = spec
        self.min_px = min_px
        self.edges: list[TruthEdge] = []

    def add(self, obj_id: int, kind: str, pw: np.ndarray, inset: dict, mask: np.ndarray | None = None):
        """Add the visible runs of a sampled 3-D curve ``pw``.

        ``inset`` maps surface key -> (N, 3) world directions into that
        surface at each sample.
        """
        vis = _visible(self.spec, obj_id, pw)
        if mask is not None:
            vis &= mask
        if not vis.any():
            return
        idx = np.flatnonzero(vis)
        breaks = np.flatnonzero(np.diff(idx) > 1)
        for run in np.split(idx, breaks + 1):
            if len(run) < 2:
                continue
            p = pw[run]
            pc = _to_camera(self.spec, p)
            xy = _image_xy(self.spec, pc)
            if np.sum(np.linalg.norm(np.diff(xy, axis=0), axis=1)) < self.min_px:
                continue
            into = {}
            for key, dirs in inset.items():
                d = dirs[run]
                xy2 = _image_xy(self.spec, _to_camera(self.spec, p + 1e-4 * d))
                v = xy2 - xy
                into[key] = v / np.linalg.norm(v, axis=1, keepdims=True)
            self.edges.append(TruthEdge(len(self.edges), obj_id, kind, xy, into, pc))


def _ground_truth(spec: SceneSpec, obj_map, face_map, points, min_px: float = 20.0) -> GroundTruth:
    cam = np.asarray(spec.position, dtype=np.float64)
    builder = _EdgeBuilder(spec, min_px)
    faces_of: dict[tuple[int, int], list[int]] = {}

    for k, b in enumerate(spec.boxes):
        R = b.rotation()
        half = np.asarray(b.size) / 2
        center = np.array([b.center[0], b.center[1], spec.table_z + half[2]])

        def front(f):
            a, s = divmod(f, 2)
            n = R[:, a] * (1 if s else -1)
            return float(n @ (cam - (center + n * half[a]))) > 0

        fronts = [front(f) for f in range(6)]
        for a in range(3):
            for bb in range(a + 1, 3):
                c = 3 - a - bb
                for sa in (0, 1):
                    for sb in (0, 1):
                        fa, fb = 2 * a + sa, 2 * bb + sb
                        kind = None
                        vis_faces = [f for f in (fa, fb) if fronts[f]]
                        if 4 in (fa, fb):
                            other = fb if fa == 4 else fa
                            if fronts[other]:
                                kind, vis_faces = "CD0", [other]
                        elif len(vis_faces) == 2:
                            kind = "CD"
                        elif len(vis_faces) == 1:
                            kind = "DD"
                        if kind is None:
                            continue
                        base = np.zeros(3)
                        base[a] = half[a] * (1 if sa else -1)
                        base[bb] = half[bb] * (1 if sb else -1)
                        e0, e1 = base.copy(), base.copy()
                        e0[c], e1[c] = -half[c], half[c]
                        p0, p1 = center + R @ e0, center + R @ e1
                        n = _sample_count(spec, p0, p1)
                        tt = np.linspace(0.0, 1.0, n)[:, None]
                        pw = p0 + tt * (p1 - p0)
                        inset = {}
                        for f in vis_faces:
                            # moving into face f means moving away from the other face's axis
                            g_axis, g_sign = (bb, sb) if f == fa else (a, sa)
                            d = -R[:, g_axis] * (1 if g_sign else -1)
                            inset[(k, f)] = np.repeat(d[None], n, axis=0)
                        before = len(builder.edges)
                        builder.add(k, kind, pw, inset)
                        for e in builder.edges[before:]:
                            for key in e.into:
                                faces_of.setdefault(key, []).append(e.id)
        for f in range(6):
            if f != 4 and fronts[f]:
                faces_of.setdefault((k, f), [])

    nb = len(spec.boxes)
    for j, cy in enumerate(spec.cylinders):
        k = nb + j
        cx, cyy = cy.center
        r = cy.radius
        z0, z1 = spec.table_z, spec.table_z + cy.height
        dxy = np.array([cam[0] - cx, cam[1] - cyy])
        D = float(np.linalg.norm(dxy))
        cap_front = cam[2] > z1
        side_key, cap_key = (k, CYL_SIDE), (k, CYL_CAP)
        side_visible = D > r
        # dense rim sampling, ~1 px spacing
        circ_px = spec.camera.pixels_for_length(2 * math.pi * r, max(1e-6, float(np.linalg.norm(cam - [cx, cyy, z1]))))
        m = max(64, int(math.ceil(circ_px * 2)))
        phi0 = math.atan2(dxy[1], dxy[0])
        if side_visible:
            half_ang = math.acos(r / D)
            start = phi0 + half_ang  # rim runs start at a tangent angle so runs never wrap
        else:
            half_ang = 0.0
            start = phi0
        phi = start + np.linspace(0.0, 2 * math.pi, m + 1)
        u = np.stack([np.cos(phi), np.sin(phi), np.zeros_like(phi)], axis=1)
        lateral_front = (u[:, :2] @ dxy) > r + 1e-12
        before = len(builder.edges)
        top = np.array([cx, cyy, z1]) + r * u
        bot = np.array([cx, cyy, z0]) + r * u
        down = np.repeat(np.array([[0.0, 0.0, -1.0]]), len(phi), axis=0)
        inward = -u
        if cap_front:
            builder.add(k, "CD", top, {cap_key: inward, side_key: down}, mask=lateral_front)
            builder.add(k, "DD", top, {cap_key: inward}, mask=~lateral_front)
        builder.add(k, "CD0", bot, {side_key: -down}, mask=lateral_front)
        if side_visible:
            for sgn in (1, -1):
                ang = phi0 + sgn * half_ang
                ut = np.array([math.cos(ang), math.sin(ang), 0.0])
                p0 = np.array([cx, cyy, z0]) + r * ut
                p1 = np.array([cx, cyy, z1]) + r * ut
                n = _sample_count(spec, p0, p1)
                pw = p0 + np.linspace(0.0, 1.0, n)[:, None] * (p1 - p0)
                # the surface tangent at a silhouette runs along the view ray, so the
                # image-plane side of the object is taken toward the axis instead
                builder.add(k, "DD", pw, {side_key: np.repeat(-ut[None], n, axis=0)})
        for e in builder.edges[before:]:
            for key in e.into:
                faces_of.setdefault(key, []).append(e.id)
        if cap_front:
            faces_of.setdefault(cap_key, [])
        if side_visible:
            faces_of.setdefault(side_key, [])

    surfaces = []
    for key in sorted(faces_of):
        pix = (obj_map == key[0]) & (face_map == key[1])
        if pix.sum() == 0:
            continue
        surfaces.append(TruthSurface(key, sorted(set(faces_of[key])), pix))
    truth = GroundTruth(builder.edges, surfaces, list(range(spec.n_objects)), obj_map, face_map, points)
    from .metrics import mark_graspable_surfaces
    mark_graspable_surfaces(truth)
    return truth
