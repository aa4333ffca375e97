"""Shared builders and brute-force references used across the test modules."""

import numpy as np
import torch

from massmin import init_field
from massmin.geometry import BoundaryCurve, TriangleMesh


def tiny_field(seed=0, **kw):
    kw.setdefault("dtype", torch.float64)
    return init_field(hidden=1, width=8, m=16, sigma_rff=2.0, seed=seed, **kw)


def zero_field(**kw):
    field = tiny_field(**kw)
    field.set_flat_params(np.zeros(field.n_params))
    return field


def linear_probe_field(c):
    """A field that is exactly f(x) = c . x + const at double precision.

    One softplus unit biased deep into its linear asymptote; the remaining
    units are constants that the zero output weights ignore.
    """
    field = zero_field(use_rff=False)
    with torch.no_grad():
        field.layers[0].weight[0] = torch.as_tensor(c, dtype=torch.float64)
        field.layers[0].bias.fill_(40.0)
        field.layers[1].weight[0, 0] = 1.0
    return field


def unit_circle(segments=96, radius=1.0, z=0.0):
    th = 2 * np.pi * np.arange(segments) / segments
    loop = np.stack([radius * np.cos(th), radius * np.sin(th),
                     np.full(segments, float(z))], axis=1)
    return BoundaryCurve([loop])


def hemisphere(n_rings=12, n_seg=48, radius=1.0):
    """Open upper hemisphere; boundary is the equator ring.

    Outward-facing winding (counterclockwise seen from outside).
    """
    verts = [np.array([0.0, 0.0, radius])]
    rings = []
    for i in range(1, n_rings + 1):
        theta = (np.pi / 2) * i / n_rings
        ids = []
        for j in range(n_seg):
            phi = 2 * np.pi * j / n_seg
            verts.append(radius * np.array([np.sin(theta) * np.cos(phi),
                                            np.sin(theta) * np.sin(phi),
                                            np.cos(theta)]))
            ids.append(len(verts) - 1)
        rings.append(ids)
    faces = []
    for j in range(n_seg):
        faces.append([0, rings[0][j], rings[0][(j + 1) % n_seg]])
    for i in range(n_rings - 1):
        a, b = rings[i], rings[i + 1]
        for j in range(n_seg):
            k = (j + 1) % n_seg
            faces.append([a[j], b[j], b[k]])
            faces.append([a[j], b[k], a[k]])
    return TriangleMesh(np.array(verts), np.array(faces))


def uv_sphere(n_lat=24, n_lon=48, radius=1.0):
    """Closed sphere: two pole fans plus quad strips."""
    verts = [np.array([0.0, 0.0, radius])]
    rings = []
    for i in range(1, n_lat):
        theta = np.pi * i / n_lat
        ids = []
        for j in range(n_lon):
            phi = 2 * np.pi * j / n_lon
            verts.append(radius * np.array([np.sin(theta) * np.cos(phi),
                                            np.sin(theta) * np.sin(phi),
                                            np.cos(theta)]))
            ids.append(len(verts) - 1)
        rings.append(ids)
    verts.append(np.array([0.0, 0.0, -radius]))
    south = len(verts) - 1
    faces = []
    for j in range(n_lon):
        faces.append([0, rings[0][j], rings[0][(j + 1) % n_lon]])
    for i in range(n_lat - 2):
        a, b = rings[i], rings[i + 1]
        for j in range(n_lon):
            k = (j + 1) % n_lon
            faces.append([a[j], b[j], b[k]])
            faces.append([a[j], b[k], a[k]])
    for j in range(n_lon):
        k = (j + 1) % n_lon
        faces.append([south, rings[-1][k], rings[-1][j]])
    return TriangleMesh(np.array(verts), np.array(faces))


def quad_segment(a, b, x, n=200000):
    """Midpoint quadrature of t_hat x (y - x)/|y - x|^3 along one segment."""
    a, b, x = (np.asarray(v, dtype=np.float64) for v in (a, b, x))
    t = b - a
    length = np.linalg.norm(t)
    t_hat = t / length
    s = (np.arange(n) + 0.5) / n
    y = a[None, :] + s[:, None] * t[None, :]
    r = y - x[None, :]
    r3 = np.linalg.norm(r, axis=1) ** 3
    return (np.cross(np.broadcast_to(t_hat, r.shape), r) / r3[:, None]).sum(axis=0) * (length / n)


def quad_curve(curve, x, n_per_seg=20000):
    total = np.zeros(3)
    for loop in curve.loops:
        for i in range(len(loop)):
            total += quad_segment(loop[i], loop[(i + 1) % len(loop)], x, n_per_seg)
    return total


def _point_segment_dist(p, a, b):
    ab = b - a
    t = np.dot(p - a, ab) / max(np.dot(ab, ab), 1e-300)
    t = min(1.0, max(0.0, t))
    return np.linalg.norm(p - (a + t * ab))


def brute_point_triangle_dist(p, a, b, c):
    """Reference point-triangle distance: interior projection if the
    barycentric coordinates allow it, else the nearest edge."""
    n = np.cross(b - a, c - a)
    nn = np.dot(n, n)
    if nn > 1e-300:
        q = p - n * (np.dot(p - a, n) / nn)
        # barycentric test of the projection
        v0, v1, v2 = c - a, b - a, q - a
        d00, d01, d02 = np.dot(v0, v0), np.dot(v0, v1), np.dot(v0, v2)
        d11, d12 = np.dot(v1, v1), np.dot(v1, v2)
        denom = d00 * d11 - d01 * d01
        if abs(denom) > 1e-300:
            u = (d11 * d02 - d01 * d12) / denom
            v = (d00 * d12 - d01 * d02) / denom
            if u >= 0 and v >= 0 and u + v <= 1:
                return np.linalg.norm(p - q)
    return min(_point_segment_dist(p, a, b),
               _point_segment_dist(p, b, c),
               _point_segment_dist(p, c, a))


def brute_mesh_dist(mesh, p):
    tris = mesh.triangles()
    return min(brute_point_triangle_dist(p, *tri) for tri in tris)
