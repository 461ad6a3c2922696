"""Vectorised numpy/scipy versions of the loop kernels.

Each function returns exactly what its numba twin returns; the arithmetic is
kept in the same order so both backends agree bit for bit on the tests.
"""

import numpy as np
from scipy import ndimage

from ._common import BOX_FACE_BASE, CYL_CAP, CYL_SIDE, EPS_HIT

_8CONN = np.ones((3, 3), dtype=bool)


def nms(mag, gx, gy):
    h, w = mag.shape
    out = np.zeros((h, w), dtype=bool)
    if h < 3 or w < 3:
        return out
    ang = np.arctan2(gy, gx) * 180.0 / np.pi
    ang = np.where(ang < 0.0, ang + 180.0, ang)
    m = mag[1:-1, 1:-1]
    a = ang[1:-1, 1:-1]
    keep = np.zeros_like(m, dtype=bool)
    for lo, hi, dr, dc in ((None, None, 0, 1), (22.5, 67.5, 1, 1),
                           (67.5, 112.5, 1, 0), (112.5, 157.5, 1, -1)):
        if lo is None:
            sel = (a < 22.5) | (a >= 157.5)
        else:
            sel = (a >= lo) & (a < hi)
        fwd = mag[1 + dr:h - 1 + dr, 1 + dc:w - 1 + dc]
        bwd = mag[1 - dr:h - 1 - dr, 1 - dc:w - 1 - dc]
        keep |= sel & (m > fwd) & (m >= bwd)
    out[1:-1, 1:-1] = keep & (m > 0.0)
    return out


def hysteresis(strong, weak):
    labels, n = ndimage.label(weak | strong, structure=_8CONN)
    if n == 0:
        return np.zeros_like(strong, dtype=bool)
    seeds = np.zeros(n + 1, dtype=bool)
    seeds[labels[strong]] = True
    seeds[0] = False
    out = seeds[labels]
    return out


def median_fill_pass(depth, valid, half):
    h, w = depth.shape
    k = 2 * half + 1
    pad_d = np.pad(depth, half, constant_values=np.nan)
    pad_v = np.pad(valid, half, constant_values=False)
    win_d = np.lib.stride_tricks.sliding_window_view(pad_d, (k, k))
    win_v = np.lib.stride_tricks.sliding_window_view(pad_v, (k, k))
    target = ~valid & win_v.any(axis=(2, 3))
    new_depth = depth.copy()
    new_valid = valid.copy()
    if target.any():
        vals = win_d[target].reshape(-1, k * k)
        ok = win_v[target].reshape(-1, k * k)
        vals = np.where(ok, vals, np.nan)
        new_depth[target] = np.nanmedian(vals, axis=1)
        new_valid[target] = True
    return new_depth, new_valid


def raycast(dirs, origin, box_rot, box_center, box_half, cyl_base, cyl_radius,
            cyl_height, table_z):
    n = dirs.shape[0]
    best = np.full(n, np.inf)
    obj = np.full(n, -2, dtype=np.int64)
    face = np.full(n, -1, dtype=np.int64)
    dx, dy, dz = dirs[:, 0], dirs[:, 1], dirs[:, 2]

    with np.errstate(divide="ignore", invalid="ignore"):
        t = (table_z - origin[2]) / dz
    hit = (dz < 0.0) & (t > 0.0)
    best[hit] = t[hit]
    obj[hit] = -1
    face[hit] = 0

    nb = box_center.shape[0]
    for k in range(nb):
        rot = box_rot[k]
        o = origin - box_center[k]
        # explicit sums in the numba kernel's order (a BLAS matmul rounds differently)
        lo = np.array([rot[0, a] * o[0] + rot[1, a] * o[1] + rot[2, a] * o[2] for a in range(3)])
        ld = np.stack([rot[0, a] * dx + rot[1, a] * dy + rot[2, a] * dz for a in range(3)], axis=1)
        hh = box_half[k]
        tnear = np.full(n, -np.inf)
        tfar = np.full(n, np.inf)
        nface = np.full(n, -1, dtype=np.int64)
        ok = np.ones(n, dtype=bool)
        for a in range(3):
            d_a = ld[:, a]
            par = np.abs(d_a) < 1e-15
            ok &= ~(par & ((lo[a] < -hh[a]) | (lo[a] > hh[a])))
            with np.errstate(divide="ignore", invalid="ignore"):
                t1 = (-hh[a] - lo[a]) / d_a
                t2 = (hh[a] - lo[a]) / d_a
            swap = t1 > t2
            f1 = np.where(swap, 2 * a + 1, 2 * a)
            t1, t2 = np.where(swap, t2, t1), np.where(swap, t1, t2)
            upd = ~par & (t1 > tnear)
            tnear = np.where(upd, t1, tnear)
            nface = np.where(upd, f1, nface)
            tfar = np.where(~par & (t2 < tfar), t2, tfar)
        win = ok & (tnear <= tfar) & (tnear > EPS_HIT) & (tnear < best)
        best[win] = tnear[win]
        obj[win] = k
        face[win] = BOX_FACE_BASE + nface[win]

    for k in range(cyl_base.shape[0]):
        r = cyl_radius[k]
        htop = cyl_base[k, 2] + cyl_height[k]
        px = origin[0] - cyl_base[k, 0]
        py = origin[1] - cyl_base[k, 1]
        a2 = dx * dx + dy * dy
        b2 = px * dx + py * dy
        c2 = px * px + py * py - r * r
        disc = b2 * b2 - a2 * c2
        with np.errstate(divide="ignore", invalid="ignore"):
            t = (-b2 - np.sqrt(np.maximum(disc, 0.0))) / a2
        z = origin[2] + t * dz
        win = ((a2 > 1e-18) & (disc >= 0.0) & (t > EPS_HIT) & (t < best)
               & (z >= cyl_base[k, 2]) & (z <= htop))
        best[win] = t[win]
        obj[win] = nb + k
        face[win] = CYL_SIDE
        with np.errstate(divide="ignore", invalid="ignore"):
            t = (htop - origin[2]) / dz
        qx = px + t * dx
        qy = py + t * dy
        win = ((np.abs(dz) > 1e-15) & (t > EPS_HIT) & (t < best)
               & (qx * qx + qy * qy <= r * r))
        best[win] = t[win]
        obj[win] = nb + k
        face[win] = CYL_CAP
    return best, obj, face
