"""Closest-point queries against meshes and polygonal curves.

The mesh side uses a median-split bounding-volume hierarchy with a
scalarized closest-point-on-triangle kernel (after Ericson, "Real-Time
Collision Detection", ch. 5).  Queries exactly match a brute-force scan
over all faces, with ties broken toward the lowest face index.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from .curves import BoundaryCurve
from .mesh import TriangleMesh


@njit(cache=True, fastmath=True)
def _tri_dist2(px, py, pz, ax, ay, az, bx, by, bz, cx, cy, cz):
    """Squared distance from p to triangle abc and the closest point."""
    abx = bx - ax; aby = by - ay; abz = bz - az
    acx = cx - ax; acy = cy - ay; acz = cz - az
    apx = px - ax; apy = py - ay; apz = pz - az
    d1 = abx * apx + aby * apy + abz * apz
    d2 = acx * apx + acy * apy + acz * apz
    if d1 <= 0.0 and d2 <= 0.0:
        qx = ax; qy = ay; qz = az
    else:
        bpx = px - bx; bpy = py - by; bpz = pz - bz
        d3 = abx * bpx + aby * bpy + abz * bpz
        d4 = acx * bpx + acy * bpy + acz * bpz
        if d3 >= 0.0 and d4 <= d3:
            qx = bx; qy = by; qz = bz
        else:
            vc = d1 * d4 - d3 * d2
            if vc <= 0.0 and d1 >= 0.0 and d3 <= 0.0:
                v = d1 / (d1 - d3)
                qx = ax + v * abx; qy = ay + v * aby; qz = az + v * abz
            else:
                cpx = px - cx; cpy = py - cy; cpz = pz - cz
                d5 = abx * cpx + aby * cpy + abz * cpz
                d6 = acx * cpx + acy * cpy + acz * cpz
                if d6 >= 0.0 and d5 <= d6:
                    qx = cx; qy = cy; qz = cz
                else:
                    vb = d5 * d2 - d1 * d6
                    if vb <= 0.0 and d2 >= 0.0 and d6 <= 0.0:
                        w = d2 / (d2 - d6)
                        qx = ax + w * acx; qy = ay + w * acy; qz = az + w * acz
                    else:
                        va = d3 * d6 - d5 * d4
                        if va <= 0.0 and (d4 - d3) >= 0.0 and (d5 - d6) >= 0.0:
                            w = (d4 - d3) / ((d4 - d3) + (d5 - d6))
                            qx = bx + w * (cx - bx); qy = by + w * (cy - by); qz = bz + w * (cz - bz)
                        else:
                            denom = 1.0 / (va + vb + vc)
                            v = vb * denom
                            w = vc * denom
                            qx = ax + abx * v + acx * w
                            qy = ay + aby * v + acy * w
                            qz = az + abz * v + acz * w
    dx = px - qx; dy = py - qy; dz = pz - qz
    return dx * dx + dy * dy + dz * dz, qx, qy, qz


@njit(cache=True, fastmath=True)
def _aabb_dist2(px, py, pz, lox, loy, loz, hix, hiy, hiz):
    d2 = 0.0
    if px < lox:
        d = lox - px; d2 += d * d
    elif px > hix:
        d = px - hix; d2 += d * d
    if py < loy:
        d = loy - py; d2 += d * d
    elif py > hiy:
        d = py - hiy; d2 += d * d
    if pz < loz:
        d = loz - pz; d2 += d * d
    elif pz > hiz:
        d = pz - hiz; d2 += d * d
    return d2


@njit(cache=True)
def _bvh_query(points, ta, tb, tc, lo, hi, left, right, start, count, order,
               out_dist, out_point, out_face):
    stack = np.empty(128, np.int64)
    for i in range(points.shape[0]):
        px = points[i, 0]; py = points[i, 1]; pz = points[i, 2]
        best = np.inf
        best_face = -1
        bx = 0.0; by = 0.0; bz = 0.0
        top = 0
        stack[0] = 0
        top = 1
        while top > 0:
            top -= 1
            node = stack[top]
            # Strict inequality keeps equal-distance candidates alive so the
            # lowest-face-index tie-break below stays exact.
            if _aabb_dist2(px, py, pz, lo[node, 0], lo[node, 1], lo[node, 2],
                           hi[node, 0], hi[node, 1], hi[node, 2]) > best:
                continue
            l = left[node]
            if l < 0:
                s = start[node]
                for j in range(s, s + count[node]):
                    f = order[j]
                    d2, qx, qy, qz = _tri_dist2(
                        px, py, pz,
                        ta[f, 0], ta[f, 1], ta[f, 2],
                        tb[f, 0], tb[f, 1], tb[f, 2],
                        tc[f, 0], tc[f, 1], tc[f, 2])
                    if d2 < best or (d2 == best and f < best_face):
                        best = d2
                        best_face = f
                        bx = qx; by = qy; bz = qz
            else:
                r = right[node]
                dl = _aabb_dist2(px, py, pz, lo[l, 0], lo[l, 1], lo[l, 2],
                                 hi[l, 0], hi[l, 1], hi[l, 2])
                dr = _aabb_dist2(px, py, pz, lo[r, 0], lo[r, 1], lo[r, 2],
                                 hi[r, 0], hi[r, 1], hi[r, 2])
                if dl < dr:
                    if dr <= best:
                        stack[top] = r; top += 1
                    if dl <= best:
                        stack[top] = l; top += 1
                else:
                    if dl <= best:
                        stack[top] = l; top += 1
                    if dr <= best:
                        stack[top] = r; top += 1
        out_dist[i] = np.sqrt(best)
        out_point[i, 0] = bx; out_point[i, 1] = by; out_point[i, 2] = bz
        out_face[i] = best_face


@njit(cache=True, fastmath=True)
def _segments_dist(points, a, b, out):
    """Distance from each point to the nearest of the given segments."""
    for i in range(points.shape[0]):
        px = points[i, 0]; py = points[i, 1]; pz = points[i, 2]
        best = np.inf
        for j in range(a.shape[0]):
            ax = a[j, 0]; ay = a[j, 1]; az = a[j, 2]
            dx = b[j, 0] - ax; dy = b[j, 1] - ay; dz = b[j, 2] - az
            wx = px - ax; wy = py - ay; wz = pz - az
            seg2 = dx * dx + dy * dy + dz * dz
            t = (wx * dx + wy * dy + wz * dz) / seg2
            if t < 0.0:
                t = 0.0
            elif t > 1.0:
                t = 1.0
            ex = wx - t * dx; ey = wy - t * dy; ez = wz - t * dz
            d2 = ex * ex + ey * ey + ez * ez
            if d2 < best:
                best = d2
        out[i] = np.sqrt(best)


def _build_bvh(mesh: TriangleMesh, leaf_size: int):
    tri = mesh.triangles()
    centers = tri.mean(axis=1)
    fmin = tri.min(axis=1)
    fmax = tri.max(axis=1)
    n = mesh.num_faces
    order = np.arange(n)
    lo, hi, left, right, start, count = [], [], [], [], [], []

    def build(s, e):
        idx = len(lo)
        sub = order[s:e]
        lo.append(fmin[sub].min(axis=0))
        hi.append(fmax[sub].max(axis=0))
        left.append(-1)
        right.append(-1)
        start.append(s)
        count.append(e - s)
        if e - s > leaf_size:
            cen = centers[sub]
            axis = int(np.argmax(cen.max(axis=0) - cen.min(axis=0)))
            key = np.argsort(cen[:, axis], kind="stable")
            order[s:e] = sub[key]
            left[idx] = build(s, s + (e - s) // 2)
            right[idx] = build(s + (e - s) // 2, e)
        return idx

    build(0, n)
    return (np.array(lo), np.array(hi), np.array(left, dtype=np.int64),
            np.array(right, dtype=np.int64), np.array(start, dtype=np.int64),
            np.array(count, dtype=np.int64), order)


def _as_batch(x):
    arr = np.asarray(x, dtype=np.float64)
    single = arr.ndim == 1
    return np.ascontiguousarray(arr.reshape(-1, 3)), single


class MeshAccel:
    """Spatial index over a mesh for closest-point and normal lookups."""

    def __init__(self, mesh: TriangleMesh, leaf_size: int = 4):
        if not mesh.num_faces:
            raise ValueError("cannot build an accelerator over an empty mesh")
        self.mesh = mesh
        tri = mesh.triangles()
        self._ta = np.ascontiguousarray(tri[:, 0])
        self._tb = np.ascontiguousarray(tri[:, 1])
        self._tc = np.ascontiguousarray(tri[:, 2])
        self.face_normals = mesh.face_normals()
        self._nodes = _build_bvh(mesh, leaf_size)

    def closest_point(self, x):
        """Closest surface point(s) for ``x``.

        Returns ``(point, normal, distance)``; the normal is the flat unit
        normal of the minimizing face.  Accepts a single point (shape (3,))
        or a batch (n, 3) and returns matching shapes.
        """
        pts, single = _as_batch(x)
        n = len(pts)
        dist = np.empty(n)
        point = np.empty((n, 3))
        face = np.empty(n, dtype=np.int64)
        _bvh_query(pts, self._ta, self._tb, self._tc, *self._nodes, dist, point, face)
        normal = self.face_normals[face]
        if single:
            return point[0], normal[0], float(dist[0])
        return point, normal, dist

    def distance(self, x):
        out = self.closest_point(x)
        return out[2]


def closest_point_curve(curve: BoundaryCurve, x):
    """Exact distance from ``x`` to the nearest curve segment.

    Accepts a single point or an (n, 3) batch; returns a float or an (n,)
    array accordingly.
    """
    if not curve.loops:
        raise ValueError("curve has no loops")
    a, b = curve.segment_arrays()
    pts, single = _as_batch(x)
    out = np.empty(len(pts))
    _segments_dist(pts, a, b, out)
    return float(out[0]) if single else out
