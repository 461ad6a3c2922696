import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import ndimage
from scipy.spatial import cKDTree

from edgegrasp.edges import (EdgeInputError, dd_strength, detect_cd_edges, detect_dd_edges, merge_edges,
                             morphological_cleanup)
from edgegrasp.imaging import compute_gradients
from edgegrasp.metrics import _resample
from edgegrasp.pipeline import run_pipeline
from edgegrasp.scenegen import Box, render

from conftest import box_scene, flat, roof_image, step_image


def _dd(img, sigma=0.0):
    return detect_dd_edges(img, compute_gradients(img, smooth_sigma=sigma))


def test_step_gives_single_vertical_chain():
    e = _dd(step_image(col=20))
    cols = np.unique(np.argwhere(e)[:, 1])
    assert len(cols) == 1 and cols[0] in (19, 20)
    lab, n = ndimage.label(e, structure=np.ones((3, 3)))
    assert n == 1
    assert e[:, cols[0]].sum() >= e.shape[0] - 2


def test_constant_image_has_no_edges():
    img = flat(np.full((20, 20), 0.7))
    assert not _dd(img).any()
    assert not detect_cd_edges(compute_gradients(img)).any()


def test_thresholds_must_be_ordered():
    img = step_image()
    with pytest.raises(EdgeInputError):
        detect_dd_edges(img, compute_gradients(img), 0.02, 0.01)


def test_dd_subset_of_low_threshold():
    rng = np.random.default_rng(3)
    img = flat(0.8 + rng.normal(0, 0.004, (40, 50)) + np.where(np.arange(50) < 25, -0.2, 0.0)[None])
    g = compute_gradients(img, smooth_sigma=1.0)
    e = detect_dd_edges(img, g, 0.005, 0.015)
    assert np.all(dd_strength(g)[e] >= 0.005)


def _near_fraction(mask, edges, tol):
    tree = cKDTree(np.argwhere(mask))
    hit = total = 0
    for e in edges:
        P, _ = _resample(e.points)
        d, _ = tree.query(np.stack([-P[:, 1], P[:, 0]], 1))
        hit += (d <= tol).sum()
        total += len(d)
    return hit / total


def test_box_silhouette_localised():
    img, truth = render(box_scene())
    res = run_pipeline(img, stop_after="edges")
    dd_truth = [e for e in truth.edges if e.kind == "DD"]
    assert _near_fraction(res.dd, dd_truth, 1.0) >= 0.95


def test_ridge_gives_one_chain():
    img = roof_image(angle_deg=90.0)
    cd = detect_cd_edges(compute_gradients(img))
    cols = np.unique(np.argwhere(cd)[:, 1])
    assert set(cols) <= {29, 30, 31}
    assert ndimage.label(cd, structure=np.ones((3, 3)))[1] == 1


def test_single_ramp_no_cd():
    c = np.arange(40)
    img = flat(np.tile(0.6 + 0.003 * c, (30, 1)))
    assert not detect_cd_edges(compute_gradients(img)).any()


def test_direction_wrap_does_not_fire():
    # gradient direction pointing along -x sits on the +-pi branch cut
    r, c = np.mgrid[0:30, 0:30]
    img = flat(0.9 - 0.002 * c + 1e-9 * np.sin(r))
    assert not detect_cd_edges(compute_gradients(img)).any()


@pytest.mark.parametrize("yaw", [0.0, 40.0])
def test_box_face_intersections_marked(yaw):
    img, truth = render(box_scene(boxes=[Box((0.0, 0.2), (0.05, 0.05, 0.09), yaw)]))
    res = run_pipeline(img, stop_after="edges")
    cd_truth = [e for e in truth.edges if e.kind == "CD"]
    assert cd_truth
    for e in cd_truth:
        assert _near_fraction(res.cd, [e], 2.0) >= 0.8


# ---- morphology ----------------------------------------------------------

def test_thick_bar_thins_to_line():
    b = np.zeros((9, 30), bool)
    b[3:6, 5:25] = True
    out = morphological_cleanup(b)
    assert np.all(out.sum(axis=0)[6:24] == 1)
    cols = np.argwhere(out)[:, 1]
    assert abs(cols.min() - 5) <= 1 and abs(cols.max() - 24) <= 1


def test_isolated_pixel_removed():
    b = np.zeros((10, 10), bool)
    b[5, 5] = True
    assert not morphological_cleanup(b).any()


def test_thick_l_stays_connected():
    b = np.zeros((30, 30), bool)
    b[5:25, 5:7] = True
    b[23:25, 5:25] = True
    out = morphological_cleanup(b)
    assert ndimage.label(out, structure=np.ones((3, 3)))[1] == 1
    # thin: no 2x2 block fully marked
    blocks = out[:-1, :-1] & out[1:, :-1] & out[:-1, 1:] & out[1:, 1:]
    assert not blocks.any()


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_cleanup_growth_bound(seed):
    rng = np.random.default_rng(seed)
    b = rng.random((25, 25)) < 0.15
    out = morphological_cleanup(b)
    grown = ndimage.binary_dilation(b, structure=np.ones((3, 3)))
    assert out.sum() <= grown.sum()
    assert not (out & ~grown).any()
    lab, n = ndimage.label(out, structure=np.ones((3, 3)))
    if n:
        assert np.bincount(lab.ravel())[1:].min() >= 5


# ---- merge ---------------------------------------------------------------

def test_merge_identities():
    rng = np.random.default_rng(0)
    a = rng.random((6, 6)) < 0.3
    z = np.zeros_like(a)
    assert np.array_equal(merge_edges(z, a), a)
    assert np.array_equal(merge_edges(a, z), a)
    assert np.array_equal(merge_edges(a, a), a)


def test_merge_shape_mismatch():
    with pytest.raises(EdgeInputError):
        merge_edges(np.zeros((2, 2)), np.zeros((3, 2)))


@settings(max_examples=50)
@given(st.integers(0, 2**32 - 1))
def test_merge_algebra(seed):
    rng = np.random.default_rng(seed)
    a, b, c = (rng.random((5, 7)) < 0.4 for _ in range(3))
    assert np.array_equal(merge_edges(a, b), merge_edges(b, a))
    assert np.array_equal(merge_edges(merge_edges(a, b), c), merge_edges(a, merge_edges(b, c)))
