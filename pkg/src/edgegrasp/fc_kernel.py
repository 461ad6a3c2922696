"""Planar force-closure geometry.

Contacts carry an inward unit normal (the direction a finger pushes) and a
friction half-angle. Cones are closed: a direction exactly on a cone edge is
inside, within ``ANGLE_TOL`` radians.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

ANGLE_TOL = 1e-9


@dataclass(frozen=True)
class PlanarContact:
    p: tuple[float, float]
    n: tuple[float, float]
    alpha_f: float

    def __post_init__(self):
        n = np.asarray(self.n, dtype=float)
        norm = float(np.linalg.norm(n))
        if abs(norm - 1.0) > 1e-6:
            if norm == 0:
                raise ValueError("contact normal must be non-zero")
            object.__setattr__(self, "n", tuple(n / norm))
        if not 0 < self.alpha_f < math.pi / 2:
            raise ValueError("friction half-angle must lie in (0, pi/2)")

    def cone_edges(self) -> list[tuple[np.ndarray, np.ndarray]]:
        """The two boundary wrenches (direction, application point)."""
        th = math.atan2(self.n[1], self.n[0])
        p = np.asarray(self.p, dtype=float)
        return [(np.array([math.cos(th + s * self.alpha_f), math.sin(th + s * self.alpha_f)]), p)
                for s in (1, -1)]


WrenchSet = list  # list of (unit direction f_i, application point p_i)


def _angle(v) -> float:
    return math.atan2(v[1], v[0])


def _wrap(a: float) -> float:
    return (a + math.pi) % (2 * math.pi) - math.pi


def _cross(a, b) -> float:
    return float(a[0] * b[1] - a[1] * b[0])


def force_direction_closure(W: WrenchSet) -> bool:
    """True iff the force directions positively span the plane.

    Equivalent to: no closed half-plane through the origin contains every
    direction, i.e. the largest angular gap between consecutive directions
    is strictly less than pi.
    """
    if len(W) < 3:
        raise ValueError("force-direction closure needs at least three wrenches")
    angs = np.sort(np.array([_angle(f) for f, _ in W]) % (2 * math.pi))
    gaps = np.diff(np.concatenate([angs, angs[:1] + 2 * math.pi]))
    return bool(gaps.max() < math.pi - ANGLE_TOL)


def _line_intersection(p1, f1, p2, f2):
    den = _cross(f1, f2)
    if abs(den) < 1e-12:
        return None
    t = _cross(np.subtract(p2, p1), f2) / den
    return np.asarray(p1, dtype=float) + t * np.asarray(f1, dtype=float)


def _strictly_in_cone(d, f1, f2) -> bool:
    """d = a*f1 + b*f2 with a, b > 0."""
    den = _cross(f1, f2)
    if abs(den) < 1e-12:
        return False
    a = _cross(d, f2) / den
    b = _cross(f1, d) / den
    scale = float(np.linalg.norm(d))
    return a > 1e-12 * scale and b > 1e-12 * scale


def _lines_concurrent(ws) -> bool:
    """Three lines of action meet at one point or are all parallel."""
    (f1, p1), (f2, p2), (f3, p3) = ws
    x = _line_intersection(p1, f1, p2, f2)
    if x is None:
        # parallel pair: concurrent only "at infinity" if the third is parallel too
        return abs(_cross(f1, f3)) < 1e-12
    return abs(_cross(np.subtract(x, p3), f3)) < 1e-9 * max(1.0, float(np.linalg.norm(np.subtract(x, p3))))


def torque_closure(W: WrenchSet) -> bool:
    """True iff some four wrenches satisfy the torque-closure construction.

    Conditions for a quadruple split into pairs (1, 2) and (3, 4):
    three of the four lines of action are not concurrent (finite or at
    infinity), and with p12, p34 the pairwise intersections,
    ``p34 - p12 = +-(a1 f1 + a2 f2) = -+(a3 f3 + a4 f4)`` for positive a_i.
    """
    if len(W) < 4:
        raise ValueError("torque closure needs at least four wrenches")
    W = [(np.asarray(f, dtype=float), np.asarray(p, dtype=float)) for f, p in W]
    for quad in itertools.combinations(W, 4):
        if all(_lines_concurrent(tri) for tri in itertools.combinations(quad, 3)):
            continue
        for (i, j), (k, m) in (((0, 1), (2, 3)), ((0, 2), (1, 3)), ((0, 3), (1, 2))):
            (f1, q1), (f2, q2), (f3, q3), (f4, q4) = quad[i], quad[j], quad[k], quad[m]
            p12 = _line_intersection(q1, f1, q2, f2)
            p34 = _line_intersection(q3, f3, q4, f4)
            if p12 is None or p34 is None:
                continue
            d = p34 - p12
            if float(np.linalg.norm(d)) < 1e-12:
                continue
            for s in (1.0, -1.0):
                if _strictly_in_cone(s * d, f1, f2) and _strictly_in_cone(-s * d, f3, f4):
                    return True
    return False


def cone_margin(direction, contact: PlanarContact) -> float:
    """alpha_f minus the angle between ``direction`` and the contact normal."""
    return contact.alpha_f - abs(_wrap(_angle(direction) - _angle(contact.n)))


def two_finger_fc(c1: PlanarContact, c2: PlanarContact) -> bool:
    """Two frictional point contacts are in force closure iff the segment
    joining them lies inside both friction cones (pushing toward each other,
    or both pulling apart for an internal grasp)."""
    d = np.subtract(c2.p, c1.p)
    if float(np.linalg.norm(d)) == 0:
        raise ValueError("contacts must be distinct")
    squeeze = cone_margin(d, c1) >= -ANGLE_TOL and cone_margin(-d, c2) >= -ANGLE_TOL
    spread = cone_margin(-d, c1) >= -ANGLE_TOL and cone_margin(d, c2) >= -ANGLE_TOL
    return bool(squeeze or spread)


def two_finger_margin(c1: PlanarContact, c2: PlanarContact) -> float:
    """Signed distance (radians) of the two-finger test from its decision boundary."""
    d = np.subtract(c2.p, c1.p)
    squeeze = min(cone_margin(d, c1), cone_margin(-d, c2))
    spread = min(cone_margin(-d, c1), cone_margin(d, c2))
    return max(squeeze, spread)


def contact_wrenches(*contacts: PlanarContact) -> WrenchSet:
    return [w for c in contacts for w in c.cone_edges()]


def _halfplanes(contacts):
    """A x <= b rows whose intersection is the triangular-grasp feasible set:
    inside the contact triangle and, for each contact, p_f - p_i within the
    contact's friction cone."""
    P = np.array([c.p for c in contacts], dtype=float)
    centroid = P.mean(axis=0)
    rows, rhs = [], []
    for i in range(3):
        a, b = P[i], P[(i + 1) % 3]
        n = np.array([b[1] - a[1], a[0] - b[0]])
        if n @ (centroid - a) > 0:
            n = -n
        rows.append(n)
        rhs.append(n @ a)
    for c in contacts:
        th = math.atan2(c.n[1], c.n[0])
        p = np.asarray(c.p, dtype=float)
        for s in (1, -1):
            e = np.array([math.cos(th + s * c.alpha_f), math.sin(th + s * c.alpha_f)])
            # the cone lies on the side of edge e that contains the normal
            n = np.array([-e[1], e[0]])
            if n @ np.asarray(c.n) > 0:
                n = -n
            rows.append(n)
            rhs.append(n @ p)
    return np.array(rows), np.array(rhs)


def triangular_fc(c1: PlanarContact, c2: PlanarContact, c3: PlanarContact):
    """Force focus point of a three-finger planar grasp, or None.

    Returns the Chebyshev centre of the feasible region (the point deepest
    inside all half-plane constraints), which is a valid focus point whenever
    the region has interior.
    """
    P = np.array([c1.p, c2.p, c3.p], dtype=float)
    area2 = _cross(P[1] - P[0], P[2] - P[0])
    scale = float(np.max(np.linalg.norm(P - P.mean(axis=0), axis=1)))
    if abs(area2) <= 1e-12 * max(scale, 1e-12) ** 2:
        raise ValueError("contacts are collinear")
    A, b = _halfplanes((c1, c2, c3))
    norms = np.linalg.norm(A, axis=1)
    # maximise r subject to A x + r |A_i| <= b
    res = linprog(c=[0.0, 0.0, -1.0], A_ub=np.column_stack([A, norms]), b_ub=b,
                  bounds=[(None, None), (None, None), (0, None)], method="highs")
    if res.status != 0 or res.x[2] <= 1e-10 * scale:
        return None
    return np.array(res.x[:2])
