import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from edgegrasp.segments import (LineSegment, PixelChain, SegmentError, connect_components, extract_segments,
                                fit_line_segments, rc_to_xy, segment_angle, segment_length)


def _line_chain(n, dr=0, dc=1, r0=5, c0=5):
    return PixelChain(np.array([(r0 + i * dr, c0 + i * dc) for i in range(n)]))


def _arc_chain(radius=40, start=0.0, stop=90.0, center=(60, 60)):
    t = np.radians(np.linspace(start, stop, 4000))
    rc = np.rint(np.stack([center[0] - radius * np.sin(t), center[1] + radius * np.cos(t)], 1)).astype(int)
    keep = np.r_[True, np.any(np.diff(rc, axis=0) != 0, axis=1)]
    return PixelChain(rc[keep])


def _dp_oracle(pts, tol):
    """Plain recursive split-at-max-deviation, returns breakpoint indices."""
    def dev(p, a, b):
        d = b - a
        n = math.hypot(*d)
        if n == 0:
            return math.hypot(*(p - a))
        return abs(d[0] * (p[1] - a[1]) - d[1] * (p[0] - a[0])) / n

    def rec(i, j):
        best, k = -1.0, None
        for m in range(i + 1, j):
            v = dev(pts[m], pts[i], pts[j])
            if v > best:
                best, k = v, m
        if k is None or best < tol:
            return [i, j]
        return rec(i, k)[:-1] + rec(k, j)

    return rec(0, len(pts) - 1)


def _random_chain(seed, n):
    rng = np.random.default_rng(seed)
    steps = np.array([(0, 1), (1, 1), (-1, 1), (1, 0)])
    walk = steps[rng.integers(0, 4, n - 1)]
    return PixelChain(np.vstack([[0, 0], np.cumsum(walk, axis=0)]) + 50)


def test_collinear_chain_single_segment():
    segs = fit_line_segments(_line_chain(50), 1.5)
    assert len(segs) == 1
    assert segs[0].length == pytest.approx(49.0)


def test_right_angle_two_segments():
    px = [(10, c) for c in range(10, 31)] + [(r, 30) for r in range(11, 31)]
    segs = fit_line_segments(PixelChain(np.array(px)), 1.0)
    assert len(segs) == 2
    corner = rc_to_xy((10, 30))
    assert np.abs(segs[0].p_end - corner).max() <= 1
    assert np.array_equal(segs[0].p_end, segs[1].p_start)


def test_quarter_circle_matches_oracle():
    ch = _arc_chain()
    segs = fit_line_segments(ch, 1.5)
    br = _dp_oracle(rc_to_xy(ch.pixels), 1.5)
    assert len(segs) == len(br) - 1
    pts = rc_to_xy(ch.pixels)
    for s, (i, j) in zip(segs, zip(br[:-1], br[1:])):
        assert np.array_equal(s.p_start, pts[i]) and np.array_equal(s.p_end, pts[j])


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(3, 120), st.floats(0.5, 5.0))
def test_partition_and_tolerance(seed, n, tol):
    ch = _random_chain(seed, n)
    segs = fit_line_segments(ch, tol)
    assert np.array_equal(np.vstack([s.member_pixels for s in segs]), ch.pixels)
    for s in segs:
        pts = rc_to_xy(s.member_pixels)
        d = s.p_end - s.p_start
        dev = np.abs(d[0] * (pts[:, 1] - s.p_start[1]) - d[1] * (pts[:, 0] - s.p_start[0])) / np.hypot(*d)
        assert dev.max() < tol
    br = _dp_oracle(rc_to_xy(ch.pixels), tol)
    assert len(segs) == len(br) - 1


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 80))
def test_infinite_tolerance_one_segment(seed, n):
    assert len(fit_line_segments(_random_chain(seed, n), 1e9)) == 1


def test_fit_errors():
    with pytest.raises(SegmentError):
        fit_line_segments(_line_chain(5), 0.0)
    with pytest.raises(SegmentError):
        fit_line_segments(_line_chain(1), 1.0)


@pytest.mark.parametrize("end,angle", [((10, 0), 0.0), ((10, 10), 45.0), ((0, 10), 90.0),
                                       ((-10, 10), 135.0), ((-10, 0), 0.0), ((-10, -10), 45.0),
                                       ((-1000, 1), 179.9427)])
def test_angle_examples(end, angle):
    L = LineSegment((0.0, 0.0), end)
    assert segment_angle(L) == pytest.approx(angle, abs=1e-3)
    assert 0.0 <= segment_angle(L) < 180.0


def test_length_example():
    assert segment_length(LineSegment((1.0, 2.0), (4.0, 6.0))) == pytest.approx(5.0)


def test_zero_length_angle_error():
    with pytest.raises(SegmentError):
        segment_angle(LineSegment((1.0, 1.0), (1.0, 1.0)))


@settings(max_examples=100)
@given(st.floats(-100, 100), st.floats(-100, 100), st.floats(-100, 100), st.floats(-100, 100))
def test_angle_orientation_folded(a, b, c, d):
    L = LineSegment((a, b), (c, d))
    if not np.any(L.p_end - L.p_start):
        return
    x, y = segment_angle(L), segment_angle(L.reversed())
    assert min(abs(x - y), 180 - abs(x - y)) < 1e-9
    assert 0.0 <= x < 180.0


def test_t_junction_three_chains():
    m = np.zeros((30, 30), bool)
    m[10, 3:27] = True
    m[11:27, 15] = True
    chains = connect_components(m)
    assert len(chains) == 3
    assert sum(len(c) for c in chains) == m.sum()
    for ch in chains:
        d = np.abs(np.diff(ch.pixels, axis=0)).max(axis=1)
        assert np.all(d == 1)


def test_separate_components():
    m = np.zeros((20, 20), bool)
    m[2, 2:12] = True
    m[15, 5:18] = True
    assert len(connect_components(m)) == 2


def test_closed_loop_traced():
    m = np.zeros((30, 30), bool)
    m[5, 5:20] = m[20, 5:20] = True
    m[5:21, 5] = m[5:21, 19] = True
    chains = connect_components(m)
    assert len(chains) == 1 and len(chains[0]) == m.sum()
    segs = fit_line_segments(chains[0], 1.5)
    assert 3 <= len(segs) <= 5


def test_min_len_filters_whole_chains():
    m = np.zeros((40, 40), bool)
    m[5, 5:10] = True          # 4 px long
    m[20, 5:35] = True         # long straight
    m[8:30, 38] = True
    segs = extract_segments(m, 1.5, 8.0)
    assert len(segs) == 2
    assert all(s.length >= 8 for s in segs)
    # a long curved chain keeps every piece even when some are short
    arc = np.zeros((120, 120), bool)
    ch = _arc_chain(radius=12, stop=180.0, center=(40, 40))
    arc[ch.pixels[:, 0], ch.pixels[:, 1]] = True
    segs = extract_segments(arc, 1.0, 8.0)
    assert sum(len(s.member_pixels) for s in segs) == arc.sum()
