"""Brute-force reference implementations used by the property and acceptance tests."""

import math

import numpy as np
from scipy.optimize import linprog


def unit(deg):
    return np.array([math.cos(math.radians(deg)), math.sin(math.radians(deg))])


def sweep_span(W, step_deg=1.0):
    """Positive span iff every test direction has a wrench strictly within 90 deg of it."""
    F = np.array([f for f, _ in W])
    for a in np.arange(0.0, 360.0, step_deg):
        if np.max(F @ unit(a)) <= 1e-12:
            return False
    return True


def _torque(f, p):
    return p[0] * f[1] - p[1] * f[0]


def _positive_arcs(N):
    """Open angle intervals where cos(t) N[0] + sin(t) N[1] is positive in every coordinate."""
    phi = np.arctan2(N[1], N[0])
    cuts = np.sort(np.concatenate([phi - np.pi / 2, phi + np.pi / 2]) % (2 * np.pi))
    cuts = np.concatenate([cuts, cuts[:1] + 2 * np.pi])
    arcs = []
    for a, b in zip(cuts[:-1], cuts[1:]):
        m = 0.5 * (a + b)
        if b - a > 1e-15 and np.all(np.cos(m) * N[0] + np.sin(m) * N[1] > 0):
            arcs.append((a, b))
    return arcs


def torque_sign_sampler(W, n=3600):
    """Over positive force-balancing coefficient vectors of four wrenches,
    look for both signs of net torque.

    The balancing vectors form a 2-D null space; the positive ones are an arc
    of its unit circle, located exactly and then sampled on an ``n``-point grid.
    Net torque is a sinusoid in the arc angle, so the arc ends and its
    stationary points are added to the samples; they hold its extremes.
    """
    F = np.array([f for f, _ in W]).T
    tau = np.array([_torque(f, p) for f, p in W])
    N = np.linalg.svd(F)[2][2:]
    crit = math.atan2(N[1] @ tau, N[0] @ tau)
    for a, b in _positive_arcs(N):
        extra = [a, b] + [c for c in crit + np.pi * np.arange(-2, 5) if a < c < b]
        th = np.concatenate([a + (b - a) * (np.arange(n) + 0.5) / n, extra])
        A = np.cos(th)[:, None] * N[0] + np.sin(th)[:, None] * N[1]
        t = A @ tau
        if (t > 1e-12).any() and (t < -1e-12).any():
            return True
    return False


def wrench_hull_lp(W):
    """Closure iff the origin is strictly inside the convex hull of the planar wrenches."""
    M = np.array([[f[0], f[1], _torque(f, p)] for f, p in W]).T
    k = M.shape[1]
    if np.linalg.matrix_rank(M, 1e-9) < 3:
        return False
    c = np.zeros(k + 1)
    c[-1] = -1
    A_eq = np.vstack([np.hstack([M, np.zeros((3, 1))]), np.hstack([np.ones((1, k)), [[0]]])])
    r = linprog(c, A_ub=np.hstack([-np.eye(k), np.ones((k, 1))]), b_ub=np.zeros(k), A_eq=A_eq,
                b_eq=[0, 0, 0, 1.0], bounds=[(0, None)] * k + [(None, None)], method="highs")
    return r.status == 0 and r.x[-1] > 1e-9


def _cross2(a, b):
    return a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]


def focus_feasible(contacts, pts):
    """Per point: strictly inside the contact triangle and inside every friction cone."""
    P = np.array([c.p for c in contacts])
    ok = np.ones(len(pts), bool)
    area = _cross2(P[1] - P[0], P[2] - P[0])
    for i in range(3):
        a, b = P[i], P[(i + 1) % 3]
        ok &= np.sign(area) * _cross2(b - a, pts - a) > 0
    for c in contacts:
        v = pts - np.asarray(c.p)
        cosang = (v @ np.asarray(c.n)) / np.maximum(np.linalg.norm(v, axis=1), 1e-300)
        ok &= cosang >= math.cos(c.alpha_f) - 1e-12
    return ok


def grid_focus(contacts, n=200):
    P = np.array([c.p for c in contacts])
    lo, hi = P.min(axis=0), P.max(axis=0)
    gx, gy = np.meshgrid(np.linspace(lo[0], hi[0], n), np.linspace(lo[1], hi[1], n))
    g = np.stack([gx.ravel(), gy.ravel()], 1)
    return bool(focus_feasible(contacts, g).any()), float(np.max(hi - lo) / (n - 1))
