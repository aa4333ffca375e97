"""Meshes, boundary curves, closest-point queries, and surface sampling."""

from .accel import MeshAccel, closest_point_curve
from .curves import (
    CURVE_KINDS,
    BoundaryCurve,
    generate_curve,
    load_curve,
    save_curve,
)
from .mesh import (
    MeshFormatError,
    SimilarityTransform,
    TriangleMesh,
    extract_boundary_loops,
    load_mesh,
    normalize_mesh,
    sample_surface,
)

__all__ = [
    "BoundaryCurve",
    "CURVE_KINDS",
    "MeshAccel",
    "MeshFormatError",
    "SimilarityTransform",
    "TriangleMesh",
    "closest_point_curve",
    "extract_boundary_loops",
    "generate_curve",
    "load_curve",
    "load_mesh",
    "normalize_mesh",
    "sample_surface",
    "save_curve",
]
