"""Current-valued quantities: the Biot-Savart field, omega = grad f + alpha,
the (possibly degenerate) background metric, and the training losses.

A current is represented by the vector field omega(x) = grad f(x) + alpha(x),
where f is a neural field and alpha is the closed-form Biot-Savart field of
the explicit polygonal boundary.  The raw Biot-Savart field of a loop
carries a circulation of magnitude 4*pi around the wire; NeuralCurrent
therefore scales it by alpha_scale / (4*pi) so that the represented surface
sheet has total strength alpha_scale.

Sign convention: with r-vectors taken from the query point to the segment
endpoints (as implemented here), the raw field circulates at -4*pi with
respect to the loop's right-hand orientation.  Reversing the loop negates
the field.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import torch
from numba import njit

from .field import NeuralField
from .geometry import BoundaryCurve, MeshAccel, closest_point_curve

FOUR_PI = 4.0 * math.pi

# Floors for the near-segment singularity: contributions never produce
# NaN/Inf, merely a large clamped value on a measure-zero set.
_CROSS_FLOOR = 1e-18
_NORM_FLOOR = 1e-18

_TINY_NORM2 = 1e-30  # below this squared norm, |v| and its gradient are 0


@njit(cache=True, fastmath=True)
def _biot_savart_kernel(a, b, t_hat, x, scale, out):
    for i in range(x.shape[0]):
        px = x[i, 0]; py = x[i, 1]; pz = x[i, 2]
        sx = 0.0; sy = 0.0; sz = 0.0
        for j in range(a.shape[0]):
            r0x = a[j, 0] - px; r0y = a[j, 1] - py; r0z = a[j, 2] - pz
            r1x = b[j, 0] - px; r1y = b[j, 1] - py; r1z = b[j, 2] - pz
            tx = t_hat[j, 0]; ty = t_hat[j, 1]; tz = t_hat[j, 2]
            n0 = np.sqrt(r0x * r0x + r0y * r0y + r0z * r0z)
            n1 = np.sqrt(r1x * r1x + r1y * r1y + r1z * r1z)
            if n0 < _NORM_FLOOR:
                n0 = _NORM_FLOOR
            if n1 < _NORM_FLOOR:
                n1 = _NORM_FLOOR
            dot = tx * (r1x / n1 - r0x / n0) \
                + ty * (r1y / n1 - r0y / n0) \
                + tz * (r1z / n1 - r0z / n0)
            cx = ty * r0z - tz * r0y
            cy = tz * r0x - tx * r0z
            cz = tx * r0y - ty * r0x
            c2 = cx * cx + cy * cy + cz * cz
            if c2 < _CROSS_FLOOR:
                c2 = _CROSS_FLOOR
            coef = dot / c2
            sx += coef * cx
            sy += coef * cy
            sz += coef * cz
        out[i, 0] = scale * sx
        out[i, 1] = scale * sy
        out[i, 2] = scale * sz


def _segment_frames(curve: BoundaryCurve, dtype=np.float64):
    a, b = curve.segment_arrays()
    d = b - a
    t_hat = d / np.linalg.norm(d, axis=1, keepdims=True) if len(d) else d
    return (np.ascontiguousarray(a, dtype=dtype),
            np.ascontiguousarray(b, dtype=dtype),
            np.ascontiguousarray(t_hat, dtype=dtype))


def biot_savart(boundary: BoundaryCurve, x, scale: float = 1.0) -> np.ndarray:
    """Closed-form Biot-Savart field of a polygonal curve.

    Sums ``(t . (r1_hat - r0_hat)) (t x r0) / |t x r0|^2`` over all segments
    of all loops, times ``scale``; r-vectors run from ``x`` to the segment
    endpoints.  Accepts a single point (3,) or a batch (n, 3).
    """
    pts = np.asarray(x, dtype=np.float64)
    single = pts.ndim == 1
    pts = np.ascontiguousarray(pts.reshape(-1, 3))
    out = np.zeros_like(pts)
    if boundary.num_loops:
        a, b, t_hat = _segment_frames(boundary)
        _biot_savart_kernel(a, b, t_hat, pts, float(scale), out)
    return out[0] if single else out


class NeuralCurrent:
    """A neural field plus its boundary: omega = grad f + alpha.

    ``alpha_scale`` is the strength of the represented surface sheet; the
    stored Biot-Savart field is the raw one times alpha_scale / (4*pi), so
    the extraction thresholds and mass estimates all live in the scaled
    regime.
    """

    def __init__(self, field: NeuralField, boundary: BoundaryCurve,
                 alpha_scale: float = 1e-3):
        if alpha_scale <= 0.0:
            raise ValueError(f"alpha_scale must be positive, got {alpha_scale}")
        self.field = field
        self.boundary = boundary
        self.alpha_scale = float(alpha_scale)
        np_dtype = np.float32 if field.dtype == torch.float32 else np.float64
        self._frames64 = _segment_frames(boundary)
        self._frames = _segment_frames(boundary, dtype=np_dtype)
        self._np_dtype = np_dtype

    def alpha(self, x) -> np.ndarray:
        """The scaled particular solution alpha at ``x``."""
        pts = np.asarray(x)
        single = pts.ndim == 1
        if pts.dtype == self._np_dtype:
            frames = self._frames
            pts = np.ascontiguousarray(pts.reshape(-1, 3))
        else:
            frames = self._frames64
            pts = np.ascontiguousarray(pts.reshape(-1, 3), dtype=np.float64)
        out = np.zeros_like(pts)
        if self.boundary.num_loops:
            a, b, t_hat = frames
            _biot_savart_kernel(a, b, t_hat, pts, self.alpha_scale / FOUR_PI, out)
        return out[0] if single else out

    def current_vector(self, x) -> np.ndarray:
        """omega(x) = grad f(x) + alpha(x), as float64."""
        pts = np.asarray(x, dtype=np.float64)
        single = pts.ndim == 1
        pts = pts.reshape(-1, 3)
        omega = self.field.gradient(pts) + self.alpha(pts).astype(np.float64)
        return omega[0] if single else omega


@dataclass
class MetricSpec:
    """Which background metric the mass norm uses.

    ``euclidean`` is the identity.  ``target`` projects out the component
    along the target surface's closest-point normal and (optionally) weights
    samples by a Gaussian falloff of their distance to the boundary curve.
    """

    mode: str = "euclidean"
    accel: MeshAccel | None = None
    boundary: BoundaryCurve | None = None
    sigma_w: float = 0.1
    boundary_weighting: bool = False

    def __post_init__(self):
        if self.mode not in ("euclidean", "target"):
            raise ValueError(f"unknown metric mode {self.mode!r}")
        if self.sigma_w <= 0.0:
            raise ValueError("sigma_w must be positive")
        if self.mode == "target" and self.accel is None:
            raise ValueError("target metric requires a mesh accelerator")
        if self.boundary_weighting and self.boundary is None:
            raise ValueError("boundary weighting requires a boundary curve")

    @classmethod
    def euclidean(cls) -> "MetricSpec":
        return cls()


def boundary_weight(boundary: BoundaryCurve, x, sigma_w: float = 0.1):
    """Gaussian falloff exp(-dist(x, boundary)^2 / (2 sigma_w^2)) in (0, 1]."""
    if sigma_w <= 0.0:
        raise ValueError("sigma_w must be positive")
    d = closest_point_curve(boundary, x)
    return np.exp(-np.square(d) / (2.0 * sigma_w * sigma_w))


def metric_matrix(spec: MetricSpec, x):
    """Dense B_x = w_x (I - n n^T) per query point, plus the weights.

    Returns ``(B, w)`` with B of shape (n, 3, 3).  Mostly useful for tests;
    the losses apply the projection without materializing matrices.
    """
    pts = np.asarray(x, dtype=np.float64).reshape(-1, 3)
    n = len(pts)
    if spec.mode == "euclidean":
        return np.broadcast_to(np.eye(3), (n, 3, 3)).copy(), np.ones(n)
    _, normals, _ = spec.accel.closest_point(pts)
    w = boundary_weight(spec.boundary, pts, spec.sigma_w) \
        if spec.boundary_weighting else np.ones(n)
    eye = np.broadcast_to(np.eye(3), (n, 3, 3))
    outer = normals[:, :, None] * normals[:, None, :]
    return w[:, None, None] * (eye - outer), w


def _safe_norms(v: torch.Tensor) -> torch.Tensor:
    # |v| with gradient defined as 0 at the kink (and numerically near it).
    s2 = v.pow(2).sum(dim=-1)
    return torch.where(s2 > _TINY_NORM2,
                       torch.sqrt(torch.clamp_min(s2, _TINY_NORM2)),
                       torch.zeros_like(s2))


def _flat_param_grads(loss: torch.Tensor, field: NeuralField) -> np.ndarray:
    params = list(field.parameters())
    grads = torch.autograd.grad(loss, params, allow_unused=True,
                                materialize_grads=True)
    return np.concatenate([g.detach().double().numpy().ravel() for g in grads])


def current_loss(current: NeuralCurrent, spec: MetricSpec, batch):
    """Mean of |B_x omega(x)| over the batch, with its parameter gradient.

    With boundary weighting on, the first half of the batch is unweighted
    and the second half carries the Gaussian boundary weight.
    Returns ``(loss, flat_gradient)``.
    """
    pts = np.ascontiguousarray(np.asarray(batch, dtype=np.float64).reshape(-1, 3))
    if not len(pts):
        raise ValueError("current_loss needs a nonempty batch")
    f = current.field
    alpha_np = current.alpha(pts.astype(current._np_dtype, copy=False))

    x = torch.as_tensor(pts, dtype=f.dtype).requires_grad_(True)
    fx = f(x)
    (grad_f,) = torch.autograd.grad(fx.sum(), x, create_graph=True)
    omega = grad_f + torch.as_tensor(alpha_np, dtype=f.dtype)

    if spec.mode == "target":
        _, normals, _ = spec.accel.closest_point(pts)
        n_t = torch.as_tensor(normals, dtype=f.dtype)
        v = omega - (omega * n_t).sum(dim=-1, keepdim=True) * n_t
    else:
        v = omega
    if spec.boundary_weighting:
        half = len(pts) // 2
        w = np.ones(len(pts))
        w[half:] = boundary_weight(spec.boundary, pts[half:], spec.sigma_w)
        v = v * torch.as_tensor(w, dtype=f.dtype).unsqueeze(-1)

    loss = _safe_norms(v).mean()
    return float(loss.detach()), _flat_param_grads(loss, f)


def surface_loss(field: NeuralField, points, normals, delta: float = 0.01,
                 eps_range=(0.0199, 0.0201), rng: np.random.Generator | None = None):
    """Hinge loss pushing f to jump by at least ``delta`` across the surface.

    Per sample: ``max(0, delta - f(x - eps n) + f(x + eps n))`` with eps
    drawn uniformly from ``eps_range`` per sample (from ``rng``).  Returns
    ``(loss, flat_gradient)``.
    """
    if delta <= 0.0:
        raise ValueError("delta must be positive")
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    nrm = np.asarray(normals, dtype=np.float64).reshape(-1, 3)
    if rng is None:
        rng = np.random.default_rng()
    eps = rng.uniform(eps_range[0], eps_range[1], len(pts))[:, None]

    both = np.concatenate([pts - eps * nrm, pts + eps * nrm], axis=0)
    x = torch.as_tensor(both, dtype=field.dtype)
    f = field(x)
    f_minus, f_plus = f[:len(pts)], f[len(pts):]
    hinge = torch.clamp_min(delta - f_minus + f_plus, 0.0)
    loss = hinge.mean()
    return float(loss.detach()), _flat_param_grads(loss, field)


def mass_estimate(current: NeuralCurrent, spec: MetricSpec, n: int,
                  rng: np.random.Generator, chunk: int = 8192):
    """Monte-Carlo mass norm over [-1, 1]^3: 8 * E[|B_x omega|], with stderr."""
    if n < 1:
        raise ValueError("need at least one sample")
    total = 0.0
    total_sq = 0.0
    remaining = n
    while remaining > 0:
        k = min(chunk, remaining)
        pts = rng.uniform(-1.0, 1.0, (k, 3))
        omega = current.current_vector(pts)
        if spec.mode == "target":
            _, normals, _ = spec.accel.closest_point(pts)
            omega = omega - (omega * normals).sum(axis=1, keepdims=True) * normals
        if spec.boundary_weighting:
            # The mass integrand uses the metric everywhere; estimation
            # applies the Gaussian weight to every sample.
            omega = omega * boundary_weight(spec.boundary, pts, spec.sigma_w)[:, None]
        y = np.linalg.norm(omega, axis=1)
        total += float(y.sum())
        total_sq += float(np.square(y).sum())
        remaining -= k
    mean = total / n
    var = max(total_sq / n - mean * mean, 0.0)
    return 8.0 * mean, 8.0 * math.sqrt(var / n)
