"""Minimal surfaces and open-surface reconstruction as neural currents.

A surface with prescribed boundary is represented by the vector field
``omega = grad f + alpha``: ``f`` is a small Fourier-feature MLP and
``alpha`` is the closed-form boundary field of a polygonal curve, so the
boundary condition holds by construction.  Training minimizes a
Monte-Carlo estimate of the mass norm, the integral of |omega| over the
domain, optionally under a degenerate metric that favors a target surface.
"""

from ._rng import stream
from .currents import (MetricSpec, NeuralCurrent, biot_savart, current_loss,
                       mass_estimate, surface_loss)
from .estimators import MinimalSurfaceEstimator, SurfaceReconstructionEstimator
from .evaluation import EvalReport, ucd
from .extract import (ExtractedMesh, ScalarGrid, export_current_grid,
                      export_mesh, filter_boundary_vertices,
                      level_from_boundary, marching_cubes, sample_grid)
from .field import (FourierFeatures, NeuralField, field_eval, field_gradient,
                    field_param_gradients, init_field)
from .geometry import (BoundaryCurve, MeshAccel, MeshFormatError,
                       SimilarityTransform, TriangleMesh, closest_point_curve,
                       extract_boundary_loops, generate_curve, load_curve,
                       load_mesh, normalize_mesh, sample_surface, save_curve)
from .optim import (Adam, FieldConfig, NumericalError, Schedule, TrainConfig,
                    adam_step, load_checkpoint, lr_at, save_checkpoint,
                    train_minimal_surface, train_reconstruction, write_log)

__version__ = "0.1.0"

__all__ = [
    "Adam",
    "BoundaryCurve",
    "EvalReport",
    "ExtractedMesh",
    "FieldConfig",
    "FourierFeatures",
    "MeshAccel",
    "MeshFormatError",
    "MetricSpec",
    "MinimalSurfaceEstimator",
    "NeuralCurrent",
    "NeuralField",
    "NumericalError",
    "ScalarGrid",
    "Schedule",
    "SimilarityTransform",
    "SurfaceReconstructionEstimator",
    "TrainConfig",
    "TriangleMesh",
    "adam_step",
    "biot_savart",
    "closest_point_curve",
    "current_loss",
    "export_current_grid",
    "export_mesh",
    "extract_boundary_loops",
    "field_eval",
    "field_gradient",
    "field_param_gradients",
    "filter_boundary_vertices",
    "generate_curve",
    "init_field",
    "level_from_boundary",
    "load_checkpoint",
    "load_curve",
    "load_mesh",
    "lr_at",
    "marching_cubes",
    "mass_estimate",
    "normalize_mesh",
    "sample_grid",
    "sample_surface",
    "save_checkpoint",
    "save_curve",
    "stream",
    "train_minimal_surface",
    "train_reconstruction",
    "ucd",
    "write_log",
]
