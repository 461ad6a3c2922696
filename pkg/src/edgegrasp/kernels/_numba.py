"""Loop kernels compiled with numba."""

import numpy as np
from numba import njit

from ._common import BOX_FACE_BASE, CYL_CAP, CYL_SIDE, EPS_HIT


@njit(cache=True)
def nms(mag, gx, gy):
    h, w = mag.shape
    out = np.zeros((h, w), dtype=np.bool_)
    for r in range(1, h - 1):
        for c in range(1, w - 1):
            m = mag[r, c]
            if m <= 0.0:
                continue
            ang = np.arctan2(gy[r, c], gx[r, c]) * 180.0 / np.pi
            if ang < 0.0:
                ang += 180.0
            if ang < 22.5 or ang >= 157.5:
                dr, dc = 0, 1
            elif ang < 67.5:
                dr, dc = 1, 1
            elif ang < 112.5:
                dr, dc = 1, 0
            else:
                dr, dc = 1, -1
            if m > mag[r + dr, c + dc] and m >= mag[r - dr, c - dc]:
                out[r, c] = True
    return out


@njit(cache=True)
def hysteresis(strong, weak):
    h, w = strong.shape
    out = np.zeros((h, w), dtype=np.bool_)
    stack_r = np.empty(h * w, dtype=np.int64)
    stack_c = np.empty(h * w, dtype=np.int64)
    top = 0
    for r in range(h):
        for c in range(w):
            if strong[r, c] and not out[r, c]:
                out[r, c] = True
                stack_r[top] = r
                stack_c[top] = c
                top += 1
                while top > 0:
                    top -= 1
                    pr = stack_r[top]
                    pc = stack_c[top]
                    for dr in range(-1, 2):
                        for dc in range(-1, 2):
                            qr = pr + dr
                            qc = pc + dc
                            if qr < 0 or qr >= h or qc < 0 or qc >= w:
                                continue
                            if weak[qr, qc] and not out[qr, qc]:
                                out[qr, qc] = True
                                stack_r[top] = qr
                                stack_c[top] = qc
                                top += 1
    return out


@njit(cache=True)
def median_fill_pass(depth, valid, half):
    h, w = depth.shape
    new_depth = depth.copy()
    new_valid = valid.copy()
    buf = np.empty((2 * half + 1) ** 2, dtype=np.float64)
    for r in range(h):
        for c in range(w):
            if valid[r, c]:
                continue
            n = 0
            for rr in range(max(0, r - half), min(h, r + half + 1)):
                for cc in range(max(0, c - half), min(w, c + half + 1)):
                    if valid[rr, cc]:
                        buf[n] = depth[rr, cc]
                        n += 1
            if n > 0:
                new_depth[r, c] = np.median(buf[:n])
                new_valid[r, c] = True
    return new_depth, new_valid


@njit(cache=True)
def raycast(dirs, origin, box_rot, box_center, box_half, cyl_base, cyl_radius,
            cyl_height, table_z):
    """Closest hit per ray; returns (t, object id, face id).

    Rays have unit camera-z component so ``t`` is the optical-axis depth.
    Object id -1 is the table, -2 is a miss."""
    n = dirs.shape[0]
    t_out = np.full(n, np.inf)
    obj_out = np.full(n, -2, dtype=np.int64)
    face_out = np.full(n, -1, dtype=np.int64)
    nb = box_center.shape[0]
    nc = cyl_base.shape[0]
    for i in range(n):
        dx = dirs[i, 0]
        dy = dirs[i, 1]
        dz = dirs[i, 2]
        best = np.inf
        bobj = -2
        bface = -1
        if dz < 0.0:
            t = (table_z - origin[2]) / dz
            if t > 0.0:
                best = t
                bobj = -1
                bface = 0
        for k in range(nb):
            # ray in box frame: R^T (o - c), R^T d
            ox = origin[0] - box_center[k, 0]
            oy = origin[1] - box_center[k, 1]
            oz = origin[2] - box_center[k, 2]
            tnear = -np.inf
            tfar = np.inf
            nface = -1
            hit = True
            for a in range(3):
                lo = box_rot[k, 0, a] * ox + box_rot[k, 1, a] * oy + box_rot[k, 2, a] * oz
                ld = box_rot[k, 0, a] * dx + box_rot[k, 1, a] * dy + box_rot[k, 2, a] * dz
                hh = box_half[k, a]
                if abs(ld) < 1e-15:
                    if lo < -hh or lo > hh:
                        hit = False
                        break
                    continue
                t1 = (-hh - lo) / ld
                t2 = (hh - lo) / ld
                f1 = 2 * a
                if t1 > t2:
                    t1, t2 = t2, t1
                    f1 = 2 * a + 1
                if t1 > tnear:
                    tnear = t1
                    nface = f1
                if t2 < tfar:
                    tfar = t2
            if hit and tnear <= tfar and tnear > EPS_HIT and tnear < best:
                best = tnear
                bobj = k
                bface = BOX_FACE_BASE + nface
        for k in range(nc):
            r = cyl_radius[k]
            htop = cyl_base[k, 2] + cyl_height[k]
            px = origin[0] - cyl_base[k, 0]
            py = origin[1] - cyl_base[k, 1]
            a2 = dx * dx + dy * dy
            if a2 > 1e-18:
                b2 = px * dx + py * dy
                c2 = px * px + py * py - r * r
                disc = b2 * b2 - a2 * c2
                if disc >= 0.0:
                    t = (-b2 - np.sqrt(disc)) / a2
                    if t > EPS_HIT and t < best:
                        z = origin[2] + t * dz
                        if z >= cyl_base[k, 2] and z <= htop:
                            best = t
                            bobj = nb + k
                            bface = CYL_SIDE
            if abs(dz) > 1e-15:
                t = (htop - origin[2]) / dz
                if t > EPS_HIT and t < best:
                    qx = px + t * dx
                    qy = py + t * dy
                    if qx * qx + qy * qy <= r * r:
                        best = t
                        bobj = nb + k
                        bface = CYL_CAP
        t_out[i] = best
        obj_out[i] = bobj
        face_out[i] = bface
    return t_out, obj_out, face_out
