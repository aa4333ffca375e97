"""Triangle meshes: OBJ loading, normalization, boundary loops, sampling."""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .curves import BoundaryCurve

_DEGENERATE_AREA = 1e-12


class MeshFormatError(ValueError):
    """Raised when an input mesh file cannot be parsed."""


class TriangleMesh:
    """Vertices ``(n, 3)`` float64 and faces ``(m, 3)`` int64.

    Counterclockwise winding defines the outward normal.  Instances are
    treated as immutable; all queries are read-only.
    """

    def __init__(self, vertices, faces):
        self.vertices = np.asarray(vertices, dtype=np.float64).reshape(-1, 3)
        self.faces = np.asarray(faces, dtype=np.int64).reshape(-1, 3)
        if self.faces.size and (self.faces.min() < 0 or self.faces.max() >= len(self.vertices)):
            raise ValueError("face index out of range")

    @property
    def num_vertices(self) -> int:
        return len(self.vertices)

    @property
    def num_faces(self) -> int:
        return len(self.faces)

    def triangles(self) -> np.ndarray:
        """Per-face corner positions, shape (m, 3, 3)."""
        return self.vertices[self.faces]

    def face_areas(self) -> np.ndarray:
        tri = self.triangles()
        cross = np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])
        return 0.5 * np.linalg.norm(cross, axis=1)

    def face_normals(self) -> np.ndarray:
        tri = self.triangles()
        cross = np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])
        norms = np.linalg.norm(cross, axis=1, keepdims=True)
        return cross / np.maximum(norms, 1e-30)

    def area(self) -> float:
        return float(self.face_areas().sum())

    def bounds(self):
        if not len(self.vertices):
            raise ValueError("empty mesh has no bounds")
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    def __repr__(self):
        return f"TriangleMesh(vertices={self.num_vertices}, faces={self.num_faces})"


@dataclass(frozen=True)
class SimilarityTransform:
    """Uniform scaling followed by translation: x -> scale * x + offset."""

    scale: float
    offset: np.ndarray

    def apply(self, points: np.ndarray) -> np.ndarray:
        return self.scale * np.asarray(points, dtype=np.float64) + self.offset

    def invert(self) -> "SimilarityTransform":
        return SimilarityTransform(1.0 / self.scale, -np.asarray(self.offset) / self.scale)


def _parse_face_token(token: str, n_vertices: int, lineno: int) -> int:
    head = token.split("/", 1)[0]
    try:
        idx = int(head)
    except ValueError:
        raise MeshFormatError(f"line {lineno}: bad face index {token!r}") from None
    if idx < 1 or idx > n_vertices:
        raise MeshFormatError(
            f"line {lineno}: face index {idx} out of range (mesh has {n_vertices} vertices)"
        )
    return idx - 1


def load_mesh(path) -> TriangleMesh:
    """Load an ASCII OBJ file (v/f records, 1-based indices).

    Polygonal faces are fan-triangulated.  Zero-area faces are dropped with
    a warning.  Records other than ``v`` and ``f`` are ignored.
    """
    path = Path(path)
    vertices: list[list[float]] = []
    raw_faces: list[tuple[int, int, int]] = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts or parts[0].startswith("#"):
                continue
            if parts[0] == "v":
                if len(parts) < 4:
                    raise MeshFormatError(f"line {lineno}: vertex needs 3 coordinates")
                try:
                    vertices.append([float(parts[1]), float(parts[2]), float(parts[3])])
                except ValueError:
                    raise MeshFormatError(f"line {lineno}: bad vertex coordinate") from None
            elif parts[0] == "f":
                if len(parts) < 4:
                    raise MeshFormatError(f"line {lineno}: face needs at least 3 indices")
                idx = [_parse_face_token(tok, len(vertices), lineno) for tok in parts[1:]]
                for k in range(1, len(idx) - 1):
                    raw_faces.append((idx[0], idx[k], idx[k + 1]))
    if not vertices or not raw_faces:
        raise MeshFormatError(f"{path}: no usable geometry (vertices={len(vertices)}, faces={len(raw_faces)})")

    mesh = TriangleMesh(np.array(vertices), np.array(raw_faces))
    keep = mesh.face_areas() > _DEGENERATE_AREA
    dropped = int((~keep).sum())
    if dropped:
        warnings.warn(f"{path}: dropped {dropped} degenerate face(s)", stacklevel=2)
        mesh = TriangleMesh(mesh.vertices, mesh.faces[keep])
    if not mesh.num_faces:
        raise MeshFormatError(f"{path}: all faces degenerate")
    return mesh


def normalize_mesh(mesh: TriangleMesh):
    """Center the mesh and scale it uniformly into [-0.5, 0.5]^3.

    Returns the normalized mesh together with the applied transform so the
    result can be mapped back to the input frame.
    """
    lo, hi = mesh.bounds()
    extent = float((hi - lo).max())
    if extent <= 0.0:
        raise ValueError("mesh bounding box has zero extent")
    scale = 1.0 / extent
    center = (lo + hi) / 2.0
    transform = SimilarityTransform(scale, -center * scale)
    return TriangleMesh(transform.apply(mesh.vertices), mesh.faces), transform


def extract_boundary_loops(mesh: TriangleMesh) -> BoundaryCurve:
    """Chain once-used edges into closed loops.

    Loop orientation follows the face winding (an oriented triangle a, b, c
    contributes directed edges a→b, b→c, c→a), so a surface with outward
    normals yields right-handed boundary loops.
    """
    count: dict[tuple[int, int], int] = {}
    direction: dict[tuple[int, int], tuple[int, int]] = {}
    for a, b, c in mesh.faces:
        for u, v in ((a, b), (b, c), (c, a)):
            key = (min(u, v), max(u, v))
            n = count.get(key, 0) + 1
            count[key] = n
            if n > 2:
                raise ValueError(f"non-manifold edge {key}: used by more than two faces")
            direction[key] = (int(u), int(v))

    nxt: dict[int, int] = {}
    for key, n in count.items():
        if n == 1:
            u, v = direction[key]
            if u in nxt:
                raise ValueError(f"non-manifold boundary at vertex {u}")
            nxt[u] = v

    loops = []
    remaining = dict(nxt)
    while remaining:
        start = min(remaining)
        chain = [start]
        v = remaining.pop(start)
        while v != start:
            chain.append(v)
            if v not in remaining:
                raise ValueError(f"boundary chain starting at vertex {start} does not close")
            v = remaining.pop(v)
        loops.append(mesh.vertices[chain])
    return BoundaryCurve(loops)


def sample_surface(mesh: TriangleMesh, n: int, rng: np.random.Generator):
    """Draw ``n`` area-weighted samples; returns (points, unit normals).

    Faces are chosen proportionally to area, positions uniformly inside each
    face via the square-root barycentric trick.  The draw order (face
    indices, then two barycentric uniforms) is fixed, so a given generator
    state always yields the same sequence.
    """
    areas = mesh.face_areas()
    total = areas.sum()
    if total <= 0.0:
        raise ValueError("mesh has zero total area")
    faces = rng.choice(mesh.num_faces, size=n, p=areas / total)
    r1 = rng.random(n)
    r2 = rng.random(n)
    su = np.sqrt(r1)
    tri = mesh.triangles()[faces]
    points = (1.0 - su)[:, None] * tri[:, 0] \
        + (su * (1.0 - r2))[:, None] * tri[:, 1] \
        + (su * r2)[:, None] * tri[:, 2]
    normals = mesh.face_normals()[faces]
    return points, normals
