"""The neural scalar field f: R^3 -> R with random Fourier features.

The field is a small MLP over a fixed sinusoidal encoding.  Training needs
exact spatial gradients and the mixed second derivatives d^2 f / dtheta dx,
both obtained through autodifferentiation; the flattened parameter vector
round-trips losslessly so an external optimizer can own the weights.
"""

from __future__ import annotations

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

from ._rng import stream

_ACTIVATIONS = ("softplus", "relu")


class FourierFeatures(nn.Module):
    """Fixed encoding x -> [cos(2 pi B x), sin(2 pi B x)].

    ``B`` has shape (m, 3) with entries drawn N(0, sigma^2); it is a buffer,
    not a parameter, and never trains.
    """

    def __init__(self, frequencies: np.ndarray, dtype=torch.float32):
        super().__init__()
        freq = torch.as_tensor(np.asarray(frequencies, dtype=np.float64), dtype=dtype)
        if freq.ndim != 2 or freq.shape[1] != 3:
            raise ValueError(f"frequency matrix must be (m, 3), got {tuple(freq.shape)}")
        self.register_buffer("frequencies", freq)

    @property
    def m(self) -> int:
        return self.frequencies.shape[0]

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        proj = 2.0 * torch.pi * (x @ self.frequencies.t())
        return torch.cat([torch.cos(proj), torch.sin(proj)], dim=-1)


def rff_encode(features: FourierFeatures, x) -> np.ndarray:
    """Encode points with the given features; numpy in, numpy out."""
    dtype = features.frequencies.dtype
    with torch.no_grad():
        out = features(torch.as_tensor(np.asarray(x, dtype=np.float64), dtype=dtype))
    return out.double().numpy()


class NeuralField(nn.Module):
    """RFF encoding followed by an MLP with softplus activations.

    Parameters
    ----------
    hidden_layers, width : MLP shape (hidden_layers >= 1).
    m : number of frequency rows; the encoded input has 2m features.
    sigma_rff : standard deviation of the Gaussian frequency draw.
    activation : "softplus" (default) or "relu" (ablation; not twice
        differentiable, so second-derivative training behaves differently).
    use_rff : when False the MLP consumes raw coordinates (ablation).
    seed : all weights and frequencies derive deterministically from this.
    """

    def __init__(self, hidden_layers=3, width=256, m=1024, sigma_rff=2.0,
                 activation="softplus", use_rff=True, seed=0, dtype=torch.float32):
        super().__init__()
        if hidden_layers < 1 or width < 1 or m < 1:
            raise ValueError("hidden_layers, width and m must all be >= 1")
        if activation not in _ACTIVATIONS:
            raise ValueError(f"activation must be one of {_ACTIVATIONS}, got {activation!r}")
        self.hidden_layers = hidden_layers
        self.width = width
        self.m = m
        self.sigma_rff = float(sigma_rff)
        self.activation = activation
        self.use_rff = use_rff
        self.seed = seed
        self._dtype = dtype

        rng = stream(seed, "init")
        # Draw order is part of the determinism contract: frequencies first
        # (even though they do not train), then each layer's weight matrix
        # (row-major) followed by its bias.
        if use_rff:
            freq = self.sigma_rff * rng.standard_normal((m, 3))
            in_dim = 2 * m
        else:
            freq = np.zeros((1, 3))
            in_dim = 3
        self.features = FourierFeatures(freq, dtype=dtype)

        dims = [in_dim] + [width] * hidden_layers + [1]
        layers = []
        for fan_in, fan_out in zip(dims[:-1], dims[1:]):
            lin = nn.Linear(fan_in, fan_out)
            bound = 1.0 / np.sqrt(fan_in)
            with torch.no_grad():
                lin.weight.copy_(torch.as_tensor(
                    rng.uniform(-bound, bound, (fan_out, fan_in)), dtype=dtype))
                lin.bias.copy_(torch.as_tensor(
                    rng.uniform(-bound, bound, fan_out), dtype=dtype))
            layers.append(lin)
        self.layers = nn.ModuleList(layers)
        self.to(dtype)

    @property
    def dtype(self):
        return self._dtype

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        h = self.features(x) if self.use_rff else x
        act = F.softplus if self.activation == "softplus" else F.relu
        for lin in self.layers[:-1]:
            h = act(lin(h))
        return self.layers[-1](h).squeeze(-1)

    # Parameter flattening (the RFF matrix is excluded: it never trains).

    @property
    def n_params(self) -> int:
        return sum(p.numel() for p in self.parameters())

    def get_flat_params(self) -> np.ndarray:
        with torch.no_grad():
            return np.concatenate(
                [p.detach().double().numpy().ravel() for p in self.parameters()])

    def set_flat_params(self, theta: np.ndarray) -> None:
        theta = np.asarray(theta, dtype=np.float64)
        if theta.shape != (self.n_params,):
            raise ValueError(f"expected {self.n_params} parameters, got {theta.shape}")
        offset = 0
        with torch.no_grad():
            for p in self.parameters():
                k = p.numel()
                p.copy_(torch.as_tensor(theta[offset:offset + k], dtype=self._dtype)
                        .reshape(p.shape))
                offset += k

    def config(self) -> dict:
        return {
            "hidden_layers": self.hidden_layers,
            "width": self.width,
            "m": self.m,
            "sigma_rff": self.sigma_rff,
            "activation": self.activation,
            "use_rff": self.use_rff,
            "seed": self.seed,
            "dtype": str(self._dtype).removeprefix("torch."),
        }

    @classmethod
    def from_config(cls, cfg: dict) -> "NeuralField":
        cfg = dict(cfg)
        cfg["dtype"] = getattr(torch, cfg.get("dtype", "float32"))
        return cls(**cfg)

    # Numpy-facing evaluation helpers.

    def _to_tensor(self, x, requires_grad=False):
        t = torch.as_tensor(np.asarray(x, dtype=np.float64), dtype=self._dtype)
        t = t.reshape(-1, 3)
        if requires_grad:
            t.requires_grad_(True)
        return t

    def values(self, x) -> np.ndarray:
        """f at the given points; numpy in, numpy (n,) out."""
        with torch.no_grad():
            return self.forward(self._to_tensor(x)).double().numpy()

    def gradient(self, x) -> np.ndarray:
        """Exact spatial gradient at the given points, shape (n, 3)."""
        t = self._to_tensor(x, requires_grad=True)
        f = self.forward(t)
        (g,) = torch.autograd.grad(f.sum(), t)
        return g.detach().double().numpy()


def init_field(hidden: int, width: int, m: int, sigma_rff: float, seed: int,
               **kwargs) -> NeuralField:
    """Construct a field; thin alias over the class for symmetric naming."""
    return NeuralField(hidden_layers=hidden, width=width, m=m,
                       sigma_rff=sigma_rff, seed=seed, **kwargs)


def field_eval(field: NeuralField, x) -> np.ndarray:
    return field.values(x)


def field_gradient(field: NeuralField, x) -> np.ndarray:
    return field.gradient(x)


def field_param_gradients(field: NeuralField, x, upstream_f, upstream_grad) -> np.ndarray:
    """Flat gradient of ``sum_i uf_i f(x_i) + ug_i . grad f(x_i)`` w.r.t. theta.

    This backpropagates through both the value channel and the spatial
    gradient channel, i.e. it includes the mixed partials d^2 f/dtheta dx.
    ``upstream_f`` has shape (n,), ``upstream_grad`` shape (n, 3).
    """
    t = field._to_tensor(x, requires_grad=True)
    uf = torch.as_tensor(np.asarray(upstream_f, dtype=np.float64),
                         dtype=field.dtype).reshape(-1)
    ug = torch.as_tensor(np.asarray(upstream_grad, dtype=np.float64),
                         dtype=field.dtype).reshape(-1, 3)
    f = field(t)
    (g,) = torch.autograd.grad(f.sum(), t, create_graph=True)
    total = (uf * f).sum() + (ug * g).sum()
    params = list(field.parameters())
    grads = torch.autograd.grad(total, params, allow_unused=True,
                                materialize_grads=True)
    return np.concatenate([gr.detach().double().numpy().ravel() for gr in grads])
