"""Adam, learning-rate schedules, and the two training drivers.

The optimizer owns a float64 master copy of the flattened parameters; the
field's (possibly float32) tensors are refreshed from it every step.  All
randomness flows through named Philox streams derived from the config seed,
so runs are bitwise reproducible.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field as dc_field, replace
from pathlib import Path

import numpy as np
import torch

from ._rng import stream
from .currents import MetricSpec, NeuralCurrent, current_loss, mass_estimate, surface_loss
from .field import NeuralField
from .geometry import BoundaryCurve, MeshAccel, TriangleMesh, extract_boundary_loops, sample_surface

_CHECKPOINT_MAGIC = b"MMCK1\n"


class NumericalError(RuntimeError):
    """Training produced a non-finite loss."""


@dataclass(frozen=True)
class Schedule:
    """Step-decay learning rate: base_lr * decay_factor ** (it // decay_every)."""

    base_lr: float
    decay_factor: float = 0.6
    decay_every: int = 10000

    def __post_init__(self):
        if not (0.0 < self.decay_factor <= 1.0):
            raise ValueError("decay_factor must be in (0, 1]")
        if self.decay_every < 1:
            raise ValueError("decay_every must be >= 1")

    def lr_at(self, iteration: int) -> float:
        if iteration < 0:
            raise ValueError("iteration must be >= 0")
        return self.base_lr * self.decay_factor ** (iteration // self.decay_every)


def lr_at(schedule: Schedule, iteration: int) -> float:
    return schedule.lr_at(iteration)


class Adam:
    """Bias-corrected Adam on a flat float64 parameter vector."""

    def __init__(self, n: int, beta1: float = 0.9, beta2: float = 0.999,
                 eps: float = 1e-8):
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.m = np.zeros(n)
        self.v = np.zeros(n)
        self.t = 0

    def step(self, theta: np.ndarray, grad: np.ndarray, lr: float) -> np.ndarray:
        if theta.shape != self.m.shape or grad.shape != self.m.shape:
            raise ValueError("parameter/gradient shape mismatch")
        self.t += 1
        self.m = self.beta1 * self.m + (1.0 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1.0 - self.beta2) * np.square(grad)
        m_hat = self.m / (1.0 - self.beta1 ** self.t)
        v_hat = self.v / (1.0 - self.beta2 ** self.t)
        return theta - lr * m_hat / (np.sqrt(v_hat) + self.eps)


def adam_step(state: Adam, theta, grad, lr):
    """Functional wrapper: returns the updated parameters (state mutates)."""
    return state.step(np.asarray(theta, dtype=np.float64),
                      np.asarray(grad, dtype=np.float64), lr)


@dataclass
class FieldConfig:
    m: int = 1024
    width: int = 256
    hidden_layers: int = 3
    sigma_rff: float = 2.0
    activation: str = "softplus"
    use_rff: bool = True
    dtype: str = "float32"

    def build(self, seed: int) -> NeuralField:
        return NeuralField(hidden_layers=self.hidden_layers, width=self.width,
                           m=self.m, sigma_rff=self.sigma_rff,
                           activation=self.activation, use_rff=self.use_rff,
                           seed=seed, dtype=getattr(torch, self.dtype))


@dataclass
class TrainConfig:
    """Everything a training run needs; defaults follow the reference setup."""

    iterations: int = 100000
    ambient_batch: int = 4096
    surface_batch: int = 4000
    base_lr: float = 0.0005
    decay_factor: float = 0.6
    decay_every: int = 10000
    seed: int = 0
    alpha_scale: float = 1e-3
    sigma_w: float = 0.1
    delta: float = 0.01
    eps_low: float = 0.0199
    eps_high: float = 0.0201
    use_surface_loss: bool = False
    boundary_weighting: bool = False
    field: FieldConfig = dc_field(default_factory=FieldConfig)
    log_every: int = 100
    mass_every: int = 1000
    mass_samples: int = 65536

    def __post_init__(self):
        if self.iterations < 0 or self.ambient_batch < 1 or self.surface_batch < 1:
            raise ValueError("iteration and batch counts must be positive")
        if self.alpha_scale <= 0.0:
            raise ValueError("alpha_scale must be positive")

    @property
    def schedule(self) -> Schedule:
        return Schedule(self.base_lr, self.decay_factor, self.decay_every)

    @classmethod
    def minimal_defaults(cls, **overrides) -> "TrainConfig":
        cfg = cls(iterations=100000, ambient_batch=4096, base_lr=0.0005,
                  decay_factor=0.6, decay_every=10000,
                  use_surface_loss=False, boundary_weighting=False)
        return replace(cfg, **overrides)

    @classmethod
    def reconstruction_defaults(cls, **overrides) -> "TrainConfig":
        cfg = cls(iterations=10000, ambient_batch=4000, surface_batch=4000,
                  base_lr=0.001, decay_factor=0.6, decay_every=2000,
                  use_surface_loss=True, boundary_weighting=True)
        return replace(cfg, **overrides)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "TrainConfig":
        data = dict(data)
        if "field" in data and isinstance(data["field"], dict):
            data["field"] = FieldConfig(**data["field"])
        return cls(**data)


def _log_row(history, iteration, lr, curr, surf, mass):
    history.append({
        "iteration": iteration,
        "lr": lr,
        "current_loss": curr,
        "surface_loss": surf,
        "mass_estimate": mass,
    })


def write_log(history, path) -> None:
    """CSV log with columns iteration, lr, current_loss, surface_loss,
    mass_estimate; absent values become empty cells.  Floats are written via
    repr, so identical histories produce identical bytes."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["iteration", "lr", "current_loss", "surface_loss", "mass_estimate"])
        for row in history:
            writer.writerow([
                row["iteration"],
                repr(row["lr"]),
                repr(row["current_loss"]),
                "" if row["surface_loss"] is None else repr(row["surface_loss"]),
                "" if row["mass_estimate"] is None else repr(row["mass_estimate"]),
            ])


def _check_finite(value: float, what: str, iteration: int):
    if not math.isfinite(value):
        raise NumericalError(f"non-finite {what} at iteration {iteration}")


def train_minimal_surface(boundary: BoundaryCurve, config: TrainConfig,
                          log_path=None):
    """Mass minimization under the Euclidean metric.

    Each step draws ``ambient_batch`` points uniformly from [-1, 1]^3,
    evaluates the current loss, and applies one Adam update.  Returns the
    trained current and the logged history.
    """
    field = config.field.build(config.seed)
    current = NeuralCurrent(field, boundary, config.alpha_scale)
    spec = MetricSpec.euclidean()
    schedule = config.schedule

    ambient = stream(config.seed, "ambient")
    mass_rng = stream(config.seed, "mass")

    theta = field.get_flat_params()
    adam = Adam(theta.size)
    history: list[dict] = []

    for it in range(config.iterations):
        lr = schedule.lr_at(it)
        batch = ambient.uniform(-1.0, 1.0, (config.ambient_batch, 3))
        loss, grad = current_loss(current, spec, batch)
        _check_finite(loss, "current loss", it)
        theta = adam.step(theta, grad, lr)
        field.set_flat_params(theta)
        last = it == config.iterations - 1
        if it % config.log_every == 0 or last:
            mass = None
            if it % config.mass_every == 0 or last:
                mass, _ = mass_estimate(current, spec, config.mass_samples, mass_rng)
            _log_row(history, it, lr, loss, None, mass)
    if log_path is not None:
        write_log(history, log_path)
    return current, history


def train_reconstruction(mesh: TriangleMesh, config: TrainConfig, log_path=None):
    """Fit a current to a normalized open target mesh.

    The target must fit in [-0.5, 0.5]^3 and have at least one boundary
    loop.  Per step: an ambient batch drives the metric-weighted current
    loss, a surface batch drives the hinge loss, and their gradients add
    with unit weights.
    """
    lo, hi = mesh.bounds()
    if lo.min() < -0.5 - 1e-9 or hi.max() > 0.5 + 1e-9:
        raise ValueError("target mesh must be normalized to [-0.5, 0.5]^3")
    boundary = extract_boundary_loops(mesh)
    if not boundary.num_loops:
        raise ValueError("target mesh is closed; reconstruction needs a boundary")

    field = config.field.build(config.seed)
    current = NeuralCurrent(field, boundary, config.alpha_scale)
    accel = MeshAccel(mesh)
    spec = MetricSpec(mode="target", accel=accel, boundary=boundary,
                      sigma_w=config.sigma_w,
                      boundary_weighting=config.boundary_weighting)
    schedule = config.schedule

    ambient = stream(config.seed, "ambient")
    surface = stream(config.seed, "surface")
    eps_rng = stream(config.seed, "eps")
    mass_rng = stream(config.seed, "mass")

    theta = field.get_flat_params()
    adam = Adam(theta.size)
    history: list[dict] = []

    for it in range(config.iterations):
        lr = schedule.lr_at(it)
        batch = ambient.uniform(-1.0, 1.0, (config.ambient_batch, 3))
        loss_c, grad = current_loss(current, spec, batch)
        _check_finite(loss_c, "current loss", it)
        loss_s = None
        if config.use_surface_loss:
            pts, nrm = sample_surface(mesh, config.surface_batch, surface)
            loss_s, grad_s = surface_loss(field, pts, nrm, config.delta,
                                          (config.eps_low, config.eps_high), eps_rng)
            _check_finite(loss_s, "surface loss", it)
            grad = grad + grad_s
        theta = adam.step(theta, grad, lr)
        field.set_flat_params(theta)
        last = it == config.iterations - 1
        if it % config.log_every == 0 or last:
            mass = None
            if it % config.mass_every == 0 or last:
                mass, _ = mass_estimate(current, spec, config.mass_samples, mass_rng)
            _log_row(history, it, lr, loss_c, loss_s, mass)
    if log_path is not None:
        write_log(history, log_path)
    return current, history


def save_checkpoint(path, current: NeuralCurrent) -> None:
    """Write a self-contained, bitwise-reproducible checkpoint.

    Layout: magic, 8-byte little-endian header length, JSON header (sorted
    keys), then raw little-endian float64 payloads for theta, the RFF
    frequency matrix, and the boundary loop vertices.
    """
    field = current.field
    theta = field.get_flat_params()
    freq = field.features.frequencies.detach().double().numpy()
    loops = current.boundary.loops
    header = {
        "alpha_scale": current.alpha_scale,
        "field": field.config(),
        "loop_sizes": [int(len(l)) for l in loops],
        "rff_shape": list(freq.shape),
        "theta_len": int(theta.size),
    }
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
    with open(path, "wb") as fh:
        fh.write(_CHECKPOINT_MAGIC)
        fh.write(len(blob).to_bytes(8, "little"))
        fh.write(blob)
        fh.write(theta.astype("<f8").tobytes())
        fh.write(freq.astype("<f8").tobytes())
        for loop in loops:
            fh.write(loop.astype("<f8").tobytes())


def load_checkpoint(path) -> NeuralCurrent:
    with open(path, "rb") as fh:
        magic = fh.read(len(_CHECKPOINT_MAGIC))
        if magic != _CHECKPOINT_MAGIC:
            raise ValueError(f"{path}: not a checkpoint file")
        n = int.from_bytes(fh.read(8), "little")
        header = json.loads(fh.read(n).decode())
        theta = np.frombuffer(fh.read(header["theta_len"] * 8), dtype="<f8").copy()
        rm, rn = header["rff_shape"]
        freq = np.frombuffer(fh.read(rm * rn * 8), dtype="<f8").copy().reshape(rm, rn)
        loops = []
        for size in header["loop_sizes"]:
            loops.append(np.frombuffer(fh.read(size * 3 * 8), dtype="<f8").copy().reshape(size, 3))
    field = NeuralField.from_config(header["field"])
    with torch.no_grad():
        field.features.frequencies.copy_(
            torch.as_tensor(freq, dtype=field.dtype))
    field.set_flat_params(theta)
    boundary = BoundaryCurve(loops)
    return NeuralCurrent(field, boundary, header["alpha_scale"])
