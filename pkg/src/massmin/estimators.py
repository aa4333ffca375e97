"""Estimator-style wrappers over the training drivers.

These follow the familiar fit/predict pattern: hyperparameters go to the
constructor, ``fit`` consumes a boundary curve (minimal surfaces) or a
target mesh (reconstruction), and ``predict`` evaluates |omega| at query
points.  The functional API in :mod:`massmin.optim` remains the primary
interface; this layer just makes the pipeline composable with sklearn
tooling (cloning, grid search, pipelines).
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from ._rng import stream
from .currents import MetricSpec, mass_estimate
from .evaluation import ucd
from .extract import ExtractedMesh, filter_boundary_vertices, level_from_boundary, marching_cubes, sample_grid
from .geometry import BoundaryCurve, TriangleMesh, load_curve, load_mesh, normalize_mesh
from .optim import FieldConfig, TrainConfig, train_minimal_surface, train_reconstruction


class _CurrentEstimator(BaseEstimator):
    def _field_config(self) -> FieldConfig:
        return FieldConfig(m=self.m, width=self.width,
                           hidden_layers=self.hidden_layers,
                           sigma_rff=self.sigma_rff, activation=self.activation,
                           use_rff=self.use_rff, dtype=self.dtype)

    def predict(self, X) -> np.ndarray:
        """|omega| at the query points, shape (n,)."""
        check_is_fitted(self, "current_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != 3:
            raise ValueError(f"expected 3-D points, got shape {X.shape}")
        return np.linalg.norm(self.current_.current_vector(X), axis=1)

    def field_values(self, X) -> np.ndarray:
        """Raw f at the query points."""
        check_is_fitted(self, "current_")
        X = check_array(X, dtype=np.float64)
        return self.current_.field.values(X)

    def extract_surface(self, resolution: int = 128,
                        delta_filter: float = 5e-3) -> ExtractedMesh:
        """Mesh the trained current (level set plus magnitude filter)."""
        check_is_fitted(self, "current_")
        grid = sample_grid(self.current_, resolution)
        level = level_from_boundary(self.current_)
        mesh = marching_cubes(grid, level)
        return filter_boundary_vertices(mesh, self.current_, delta_filter)


class MinimalSurfaceEstimator(_CurrentEstimator):
    """Fit a minimal surface spanning a prescribed boundary curve."""

    def __init__(self, iterations=100000, ambient_batch=4096, base_lr=0.0005,
                 decay_factor=0.6, decay_every=10000, seed=0, alpha_scale=1e-3,
                 m=1024, width=256, hidden_layers=3, sigma_rff=2.0,
                 activation="softplus", use_rff=True, dtype="float32",
                 log_every=100):
        self.iterations = iterations
        self.ambient_batch = ambient_batch
        self.base_lr = base_lr
        self.decay_factor = decay_factor
        self.decay_every = decay_every
        self.seed = seed
        self.alpha_scale = alpha_scale
        self.m = m
        self.width = width
        self.hidden_layers = hidden_layers
        self.sigma_rff = sigma_rff
        self.activation = activation
        self.use_rff = use_rff
        self.dtype = dtype
        self.log_every = log_every

    def fit(self, X, y=None):
        """Train on a boundary: a BoundaryCurve, a loops list, or a JSON path."""
        if isinstance(X, BoundaryCurve):
            curve = X
        elif isinstance(X, (str, bytes)) or hasattr(X, "__fspath__"):
            curve = load_curve(X)
        else:
            curve = BoundaryCurve(X)
        config = TrainConfig.minimal_defaults(
            iterations=self.iterations, ambient_batch=self.ambient_batch,
            base_lr=self.base_lr, decay_factor=self.decay_factor,
            decay_every=self.decay_every, seed=self.seed,
            alpha_scale=self.alpha_scale, field=self._field_config(),
            log_every=self.log_every)
        self.current_, self.history_ = train_minimal_surface(curve, config)
        self.boundary_ = curve
        return self

    def mass(self, n: int = 65536):
        """Monte-Carlo mass of the fitted current (estimate, stderr)."""
        check_is_fitted(self, "current_")
        return mass_estimate(self.current_, MetricSpec.euclidean(), n,
                             stream(self.seed, "eval"))


class SurfaceReconstructionEstimator(_CurrentEstimator):
    """Fit a current to an open target mesh (normalized internally)."""

    def __init__(self, iterations=10000, ambient_batch=4000, surface_batch=4000,
                 base_lr=0.001, decay_factor=0.6, decay_every=2000, seed=0,
                 alpha_scale=1e-3, sigma_w=0.1, delta=0.01,
                 use_surface_loss=True, boundary_weighting=True,
                 m=1024, width=256, hidden_layers=3, sigma_rff=2.0,
                 activation="softplus", use_rff=True, dtype="float32",
                 log_every=100):
        self.iterations = iterations
        self.ambient_batch = ambient_batch
        self.surface_batch = surface_batch
        self.base_lr = base_lr
        self.decay_factor = decay_factor
        self.decay_every = decay_every
        self.seed = seed
        self.alpha_scale = alpha_scale
        self.sigma_w = sigma_w
        self.delta = delta
        self.use_surface_loss = use_surface_loss
        self.boundary_weighting = boundary_weighting
        self.m = m
        self.width = width
        self.hidden_layers = hidden_layers
        self.sigma_rff = sigma_rff
        self.activation = activation
        self.use_rff = use_rff
        self.dtype = dtype
        self.log_every = log_every

    def fit(self, X, y=None):
        """Train on a target mesh (TriangleMesh or OBJ path)."""
        mesh = load_mesh(X) if not isinstance(X, TriangleMesh) else X
        normalized, transform = normalize_mesh(mesh)
        config = TrainConfig.reconstruction_defaults(
            iterations=self.iterations, ambient_batch=self.ambient_batch,
            surface_batch=self.surface_batch, base_lr=self.base_lr,
            decay_factor=self.decay_factor, decay_every=self.decay_every,
            seed=self.seed, alpha_scale=self.alpha_scale, sigma_w=self.sigma_w,
            delta=self.delta, use_surface_loss=self.use_surface_loss,
            boundary_weighting=self.boundary_weighting,
            field=self._field_config(), log_every=self.log_every)
        self.current_, self.history_ = train_reconstruction(normalized, config)
        self.target_ = normalized
        self.transform_ = transform
        return self

    def score(self, X=None, y=None, resolution: int = 128,
              n: int = 100000) -> float:
        """Negative UCD of the extracted surface against the fitted target
        (higher is better, sklearn convention)."""
        check_is_fitted(self, "current_")
        extracted = self.extract_surface(resolution)
        return -ucd(self.target_, extracted.mesh, n, stream(self.seed, "eval"))
