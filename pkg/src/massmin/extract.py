"""From a trained current to an explicit open mesh.

Pipeline: sample f on a lattice, pick the level as the average of f over the
boundary, run marching cubes, then drop vertices where |omega| falls under
the filter threshold (the level set is generically closed; the filter keeps
only the sheet that carries the current).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from skimage.measure import marching_cubes as _skimage_marching_cubes

from .currents import NeuralCurrent
from .geometry import TriangleMesh

_DEFAULT_DOMAIN = ((-1.0, -1.0, -1.0), (1.0, 1.0, 1.0))


@dataclass
class ScalarGrid:
    """Scalar samples on a regular lattice over a box.

    ``values`` is flat in x-fastest order: the node (i, j, k) lives at flat
    index ``i + nx * (j + ny * k)``.
    """

    resolution: tuple[int, int, int]
    domain: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        self.resolution = tuple(int(r) for r in self.resolution)
        if any(r < 2 for r in self.resolution):
            raise ValueError("resolution must be >= 2 per axis")
        self.domain = np.asarray(self.domain, dtype=np.float64).reshape(2, 3)
        expected = self.resolution[0] * self.resolution[1] * self.resolution[2]
        self.values = np.asarray(self.values).ravel()
        if self.values.size != expected:
            raise ValueError(f"expected {expected} values, got {self.values.size}")

    def axes(self):
        lo, hi = self.domain
        return tuple(np.linspace(lo[k], hi[k], self.resolution[k]) for k in range(3))

    def spacing(self):
        lo, hi = self.domain
        return tuple((hi[k] - lo[k]) / (self.resolution[k] - 1) for k in range(3))


def grid_points(resolution, domain=_DEFAULT_DOMAIN) -> np.ndarray:
    """Lattice node coordinates in the grid's flat (x-fastest) order."""
    grid = ScalarGrid(resolution, domain, np.zeros(int(np.prod(resolution))))
    xs, ys, zs = grid.axes()
    gx, gy, gz = np.meshgrid(xs, ys, zs, indexing="ij")
    return np.stack([gx.ravel(order="F"), gy.ravel(order="F"), gz.ravel(order="F")], axis=1)


def sample_grid(current: NeuralCurrent, resolution, domain=_DEFAULT_DOMAIN,
                chunk: int = 65536) -> ScalarGrid:
    """Evaluate f at every lattice node."""
    if np.isscalar(resolution):
        resolution = (int(resolution),) * 3
    pts = grid_points(resolution, domain)
    values = np.empty(len(pts))
    for s in range(0, len(pts), chunk):
        values[s:s + chunk] = current.field.values(pts[s:s + chunk])
    return ScalarGrid(resolution, np.asarray(domain), values)


def level_from_boundary(current: NeuralCurrent) -> float:
    """Average of f over the first boundary loop's vertices."""
    if not current.boundary.num_loops:
        raise ValueError("current has no boundary loops")
    return float(current.field.values(current.boundary.loops[0]).mean())


def marching_cubes(grid: ScalarGrid, level: float) -> TriangleMesh:
    """Triangulate the level set of the sampled field.

    Uses the classic 256-case lookup table with linear edge interpolation.
    Returns an empty mesh when the level does not cross the grid.
    """
    values = grid.values
    if not (values.min() < level < values.max()):
        return TriangleMesh(np.zeros((0, 3)), np.zeros((0, 3), dtype=np.int64))
    volume = np.ascontiguousarray(values.reshape(grid.resolution, order="F"))
    verts, faces, _, _ = _skimage_marching_cubes(
        volume, level=level, spacing=grid.spacing(), method="lorensen")
    verts = verts + grid.domain[0]
    return TriangleMesh(verts, faces.astype(np.int64))


@dataclass
class ExtractedMesh:
    """A filtered level-set mesh with per-vertex |omega| magnitudes."""

    mesh: TriangleMesh
    magnitudes: np.ndarray


def filter_boundary_vertices(mesh: TriangleMesh, current: NeuralCurrent,
                             delta_filter: float = 5e-3,
                             chunk: int = 65536) -> ExtractedMesh:
    """Drop vertices where |omega| < delta_filter, with incident faces.

    The remaining open mesh is the surface actually carrying the current;
    magnitudes are evaluated at the interpolated vertex positions using the
    scaled alpha.
    """
    n = mesh.num_vertices
    mags = np.empty(n)
    for s in range(0, n, chunk):
        omega = current.current_vector(mesh.vertices[s:s + chunk])
        mags[s:s + chunk] = np.linalg.norm(omega, axis=1)
    keep = mags >= delta_filter
    if keep.all():
        return ExtractedMesh(mesh, mags)
    remap = -np.ones(n, dtype=np.int64)
    remap[keep] = np.arange(int(keep.sum()))
    face_ok = keep[mesh.faces].all(axis=1) if mesh.num_faces else np.zeros(0, bool)
    faces = remap[mesh.faces[face_ok]]
    return ExtractedMesh(TriangleMesh(mesh.vertices[keep], faces), mags[keep])


def export_mesh(mesh: TriangleMesh, path, fmt: str | None = None) -> None:
    """Write ASCII OBJ or binary little-endian PLY (by flag or suffix)."""
    path = Path(path)
    if fmt is None:
        fmt = path.suffix.lstrip(".").lower()
    if fmt == "obj":
        lines = []
        for v in mesh.vertices:
            lines.append(f"v {v[0]:.9g} {v[1]:.9g} {v[2]:.9g}")
        for f in mesh.faces:
            lines.append(f"f {f[0] + 1} {f[1] + 1} {f[2] + 1}")
        path.write_text("\n".join(lines) + ("\n" if lines else ""))
    elif fmt == "ply":
        header = "\n".join([
            "ply",
            "format binary_little_endian 1.0",
            f"element vertex {mesh.num_vertices}",
            "property float x",
            "property float y",
            "property float z",
            f"element face {mesh.num_faces}",
            "property list uchar int vertex_indices",
            "end_header",
        ]) + "\n"
        face_rec = np.empty(mesh.num_faces,
                            dtype=[("n", "u1"), ("idx", "<i4", (3,))])
        face_rec["n"] = 3
        face_rec["idx"] = mesh.faces
        with open(path, "wb") as fh:
            fh.write(header.encode("ascii"))
            fh.write(mesh.vertices.astype("<f4").tobytes())
            fh.write(face_rec.tobytes())
    else:
        raise ValueError(f"unsupported mesh format {fmt!r} (use obj or ply)")


def export_current_grid(current: NeuralCurrent, resolution, path,
                        domain=_DEFAULT_DOMAIN, chunk: int = 65536) -> None:
    """Dump omega on a lattice as raw float32 plus a JSON sidecar.

    The payload interleaves the three components per node (x-fastest node
    order, little-endian float32, 12 bytes per node); the sidecar at
    ``path + ".json"`` records resolution and domain.
    """
    if np.isscalar(resolution):
        resolution = (int(resolution),) * 3
    pts = grid_points(resolution, domain)
    out = np.empty((len(pts), 3), dtype="<f4")
    for s in range(0, len(pts), chunk):
        out[s:s + chunk] = current.current_vector(pts[s:s + chunk]).astype("<f4")
    path = Path(path)
    path.write_bytes(out.tobytes())
    sidecar = {
        "resolution": [int(r) for r in resolution],
        "domain": np.asarray(domain, dtype=float).reshape(2, 3).tolist(),
    }
    Path(str(path) + ".json").write_text(json.dumps(sidecar) + "\n")
