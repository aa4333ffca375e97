"""Quantitative evaluation of reconstructed surfaces."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .geometry import MeshAccel, TriangleMesh, sample_surface


def ucd(gt: TriangleMesh, recon: TriangleMesh, n: int = 100000,
        rng: np.random.Generator | None = None) -> float:
    """Unidirectional Chamfer distance from ``gt`` to ``recon``.

    Mean exact point-to-mesh distance from ``n`` area-weighted samples of
    the ground truth to the reconstruction.  Directed: swapping the
    arguments measures something else.
    """
    if not gt.num_faces:
        raise ValueError("ground-truth mesh is empty")
    if not recon.num_faces:
        raise ValueError("reconstructed mesh is empty")
    if rng is None:
        rng = np.random.default_rng()
    points, _ = sample_surface(gt, n, rng)
    accel = MeshAccel(recon)
    return float(accel.distance(points).mean())


@dataclass
class EvalReport:
    """What a training command reports: UCD (when applicable) and mass."""

    ucd: float | None
    n_samples: int
    seed: int
    mass: float | None = None
    mass_stderr: float | None = None
    ablations: dict | None = None

    def to_dict(self) -> dict:
        return asdict(self)

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path) -> "EvalReport":
        return cls(**json.loads(Path(path).read_text()))
