import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from edgegrasp.features import EdgeLabel
from edgegrasp.metrics import edge_coverage, evaluate_detection
from edgegrasp.pipeline import run_pipeline
from edgegrasp.scenegen import Box, Cylinder, SceneError, SceneSpec, render

from conftest import box_scene, cylinder_scene, rendered, suite_paths


def _world(spec, pc):
    return pc @ spec.rotation.T + np.asarray(spec.position)


def _corners(spec, b):
    R = b.rotation()
    half = np.asarray(b.size) / 2
    c = np.array([b.center[0], b.center[1], spec.table_z + half[2]])
    return np.array([c + R @ (half * s) for s in itertools.product((-1, 1), repeat=3)])


def _image_xy(spec, pw):
    rc = spec.camera.project((pw - np.asarray(spec.position)) @ spec.rotation)
    return np.stack([rc[:, 1], -rc[:, 0]], 1)


def test_top_face_box_four_dd():
    spec = box_scene(position=(0.0, 0.195, 0.6))
    _, truth = render(spec)
    kinds = [e.kind for e in truth.edges]
    assert kinds.count("DD") == 4 and kinds.count("CD") <= 3
    corners = _image_xy(spec, _corners(spec, spec.boxes[0]))
    for e in truth.edges:
        for end in (e.points[0], e.points[-1]):
            assert np.min(np.linalg.norm(corners - end, axis=1)) < 1e-6


def test_oblique_box_edges_match_projection():
    spec = box_scene()
    _, truth = render(spec)
    kinds = sorted(e.kind for e in truth.edges)
    assert kinds == ["CD", "CD0"] + ["DD"] * 5
    corners = _image_xy(spec, _corners(spec, spec.boxes[0]))
    for e in truth.edges:
        for end in (e.points[0], e.points[-1]):
            assert np.min(np.linalg.norm(corners - end, axis=1)) < 1e-6
    # the silhouette is the hull of the projected corners; its edges are DD or the table contact
    from scipy.spatial import ConvexHull
    hull = corners[ConvexHull(corners).vertices]
    hull_edges = {frozenset(map(tuple, np.round([hull[i], hull[(i + 1) % len(hull)]], 6))) for i in range(len(hull))}
    for e in truth.edges:
        key = frozenset(map(tuple, np.round([e.points[0], e.points[-1]], 6)))
        if e.kind == "DD":
            assert key in hull_edges
        if e.kind == "CD":
            assert key not in hull_edges


def test_empty_scene():
    spec = SceneSpec(name="empty")
    img, truth = render(spec)
    assert truth.edges == [] and truth.surfaces == []
    assert img.valid.all() and np.all(truth.object_map == -1)
    # table depth along each ray, in closed form
    rays = spec.camera.rays(spec.height, spec.width) @ spec.rotation.T
    t = -spec.position[2] / rays[..., 2]
    assert np.abs(img.depth - t).max() < 1e-9


def test_cylinder_edges():
    spec = cylinder_scene()
    _, truth = render(spec)
    kinds = sorted(e.kind for e in truth.edges)
    assert kinds == ["CD", "CD0", "DD", "DD", "DD"]
    cyl = spec.cylinders[0]
    lateral = [e for e in truth.edges if e.kind == "DD" and len(e.into) == 1 and (0, 0) in e.into]
    assert len(lateral) == 2
    for e in truth.edges:
        pw = _world(spec, e.points3d)
        r = np.hypot(pw[:, 0] - cyl.center[0], pw[:, 1] - cyl.center[1])
        assert np.allclose(r, cyl.radius, atol=1e-9)
        assert np.all((pw[:, 2] > -1e-9) & (pw[:, 2] < cyl.height + 1e-9))


def test_truth_points_on_primitives():
    for p in suite_paths():
        spec = SceneSpec.load(p)
        _, truth = rendered(p.stem)
        for e in truth.edges:
            pw = _world(spec, e.points3d)
            assert np.abs(_image_xy(spec, pw) - e.points).max() < 1e-6
            k = e.object_id
            if k < len(spec.boxes):
                b = spec.boxes[k]
                half = np.asarray(b.size) / 2
                local = (pw - [b.center[0], b.center[1], spec.table_z + half[2]]) @ b.rotation()
                on_face = np.abs(np.abs(local) - half) < 1e-9
                assert np.all(on_face.sum(axis=1) >= 2)
            else:
                c = spec.cylinders[k - len(spec.boxes)]
                r = np.hypot(pw[:, 0] - c.center[0], pw[:, 1] - c.center[1])
                assert np.allclose(r, c.radius, atol=1e-9)


def test_truth_surfaces_rendered():
    _, truth = rendered("05_mixed_low")
    for s in truth.surfaces:
        assert np.all(truth.object_map[s.pixels] == s.key[0])
        assert np.all(truth.face_map[s.pixels] == s.key[1])


def test_render_deterministic():
    spec = box_scene(noise_sigma=0.002, seed=3)
    a, _ = render(spec)
    b, _ = render(spec)
    c, _ = render(spec.with_noise(0.002, 4))
    assert np.array_equal(a.depth, b.depth)
    assert not np.array_equal(a.depth, c.depth)
    clean, _ = render(box_scene())
    assert 0.0015 < np.std((a.depth - clean.depth)[clean.valid]) < 0.0025


def test_invalid_specs():
    with pytest.raises(SceneError):
        render(box_scene(boxes=[Box((0.0, 0.2), (0.05, -0.05, 0.09), 0.0)]))
    with pytest.raises(SceneError):
        render(box_scene(position=(0.0, 0.2, 0.05)))     # inside the box
    with pytest.raises(SceneError):
        SceneSpec.from_ini("[scene]\nwidth = abc\n")


def test_ini_roundtrip():
    spec = SceneSpec.load(suite_paths()[4])
    again = SceneSpec.from_ini(spec.to_ini(), spec.name)
    assert again == spec


# ---- detection evaluation ---------------------------------------------

@pytest.fixture(scope="module")
def box_result():
    img, truth = render(box_scene())
    return run_pipeline(img, unconstrained=True, stop_after="pairs"), truth


def test_perfect_detection(box_result):
    res, truth = box_result
    rep = evaluate_detection(res.features, res.pairs, truth)
    assert rep.edge_rate == rep.surface_rate == rep.object_rate == 1.0
    empty = evaluate_detection([], [], truth)
    assert empty.edge_rate == empty.surface_rate == empty.object_rate == 0.0


def test_dropping_an_edge_keeps_surface(box_result):
    res, truth = box_result
    back = next(e for e in truth.edges if e.kind == "DD" and list(e.into) == [(0, 5)]
                and abs(e.points[0][1] - e.points[-1][1]) < 1)
    keep = [f for f in res.features if edge_coverage(back, [f]) < 0.2]
    assert len(keep) < len(res.features)
    full = evaluate_detection(res.features, res.pairs, truth)
    part = evaluate_detection(keep, res.pairs, truth)
    assert part.edges_detected == full.edges_detected - 1
    assert part.surface_hits[(0, 5)] and part.surface_rate == full.surface_rate


def test_wrong_label_not_counted(box_result):
    from dataclasses import replace
    res, truth = box_result
    flipped = [replace(f, label=EdgeLabel.DD_POS if f.label is EdgeLabel.DD_NEG else
                       EdgeLabel.DD_NEG if f.label is EdgeLabel.DD_POS else f.label) for f in res.features]
    rep = evaluate_detection(flipped, [], truth)
    n_cd = sum(e.kind == "CD" for e in truth.graspable_edges)
    assert rep.edges_detected <= n_cd


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_rates_monotone_under_removal(seed):
    res, truth = rendered_pipeline()
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(res.features))
    prev = None
    for k in range(0, len(order) + 1, max(1, len(order) // 6)):
        kept = [res.features[i] for i in sorted(order[k:])]
        rep = evaluate_detection(kept, res.pairs, truth)
        rates = (rep.edges_detected, rep.surfaces_detected, rep.objects_detected)
        if prev is not None:
            assert all(a <= b for a, b in zip(rates, prev))
        prev = rates


_CACHE = {}


def rendered_pipeline():
    if "r" not in _CACHE:
        img, truth = rendered("02_boxes")
        _CACHE["r"] = (run_pipeline(img, unconstrained=True, stop_after="pairs"), truth)
    return _CACHE["r"]
