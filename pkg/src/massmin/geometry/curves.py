"""Closed polygonal boundary curves.

A :class:`BoundaryCurve` is a list of closed loops, each stored as an
``(k, 3)`` array of vertices.  The segment from the last vertex back to the
first is implicit.  Vertex order fixes the orientation of each loop.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

_MIN_SEGMENT = 1e-9


class BoundaryCurve:
    """One or more closed polygonal loops in R^3.

    Parameters
    ----------
    loops : sequence of array-like, each (k, 3)
        Vertex positions of every loop, k >= 3.  Consecutive vertices
        (including the wrap-around pair) must be farther apart than 1e-9.
    """

    def __init__(self, loops):
        cleaned = []
        for li, loop in enumerate(loops):
            arr = np.asarray(loop, dtype=np.float64)
            if arr.ndim != 2 or arr.shape[1] != 3:
                raise ValueError(f"loop {li}: expected shape (k, 3), got {arr.shape}")
            if arr.shape[0] < 3:
                raise ValueError(f"loop {li}: needs at least 3 vertices, got {arr.shape[0]}")
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"loop {li}: non-finite vertex")
            gaps = np.linalg.norm(np.roll(arr, -1, axis=0) - arr, axis=1)
            if np.any(gaps <= _MIN_SEGMENT):
                j = int(np.argmin(gaps))
                raise ValueError(f"loop {li}: degenerate segment at vertex {j} (length {gaps[j]:.3g})")
            cleaned.append(arr)
        self.loops = cleaned

    @property
    def num_loops(self) -> int:
        return len(self.loops)

    @property
    def num_segments(self) -> int:
        return sum(loop.shape[0] for loop in self.loops)

    def segment_arrays(self):
        """All segments of all loops as (starts, ends), each (s, 3)."""
        if not self.loops:
            z = np.zeros((0, 3))
            return z, z.copy()
        starts = np.concatenate(self.loops, axis=0)
        ends = np.concatenate([np.roll(loop, -1, axis=0) for loop in self.loops], axis=0)
        return starts, ends

    def total_length(self) -> float:
        a, b = self.segment_arrays()
        return float(np.linalg.norm(b - a, axis=1).sum())

    def reversed(self) -> "BoundaryCurve":
        """Same geometry with every loop orientation flipped."""
        return BoundaryCurve([loop[::-1] for loop in self.loops])

    def to_dict(self) -> dict:
        return {"loops": [loop.tolist() for loop in self.loops]}

    @classmethod
    def from_dict(cls, data: dict) -> "BoundaryCurve":
        if "loops" not in data:
            raise ValueError("curve data missing 'loops' key")
        return cls(data["loops"])

    def __repr__(self):
        return f"BoundaryCurve(loops={self.num_loops}, segments={self.num_segments})"


def save_curve(curve: BoundaryCurve, path) -> None:
    Path(path).write_text(json.dumps(curve.to_dict()) + "\n")


def load_curve(path) -> BoundaryCurve:
    with open(path) as fh:
        data = json.load(fh)
    return BoundaryCurve.from_dict(data)


def _circle(t):
    return np.stack([0.9 * np.cos(t), 0.9 * np.sin(t), np.zeros_like(t)], axis=1)


def _trefoil(t):
    # Classic (2,3) torus-knot embedding, scaled so the extreme coordinate
    # (|y| at t = pi) lands at 0.9.
    return 0.3 * np.stack(
        [np.sin(t) + 2.0 * np.sin(2.0 * t),
         np.cos(t) - 2.0 * np.cos(2.0 * t),
         -np.sin(3.0 * t)],
        axis=1,
    )


def _hopf(t):
    # Two linked circles in orthogonal planes, each passing through the
    # other's center (centers one radius apart), recentred and shrunk to
    # keep a 0.1 margin inside the unit box.
    r = 0.6
    a = np.stack([-0.3 + r * np.cos(t), r * np.sin(t), np.zeros_like(t)], axis=1)
    b = np.stack([0.3 + r * np.cos(t), np.zeros_like(t), r * np.sin(t)], axis=1)
    return [a, b]


def _borromean(t):
    # Three mutually orthogonal ellipses with semi-axes in ratio (1, 0.5).
    a, b = 0.9, 0.45
    e1 = np.stack([a * np.cos(t), b * np.sin(t), np.zeros_like(t)], axis=1)
    e2 = np.stack([np.zeros_like(t), a * np.cos(t), b * np.sin(t)], axis=1)
    e3 = np.stack([b * np.sin(t), np.zeros_like(t), a * np.cos(t)], axis=1)
    return [e1, e2, e3]


_GENERATORS = {
    "circle": lambda t: [_circle(t)],
    "trefoil": lambda t: [_trefoil(t)],
    "hopf": _hopf,
    "borromean": _borromean,
}

CURVE_KINDS = tuple(sorted(_GENERATORS))


def generate_curve(kind: str, segments: int = 256, scale: float = 1.0) -> BoundaryCurve:
    """Sample a named closed curve as a polygon.

    All base curves fit inside [-1, 1]^3 with a margin of 0.1 at scale 1;
    the circle has radius 0.9·scale and lies in the z = 0 plane.  Each loop
    receives ``segments`` vertices at equally spaced parameter values.
    """
    if kind not in _GENERATORS:
        raise ValueError(f"unknown curve kind {kind!r}, expected one of {CURVE_KINDS}")
    if segments < 12:
        raise ValueError(f"segments must be >= 12, got {segments}")
    t = 2.0 * np.pi * np.arange(segments) / segments
    loops = [scale * loop for loop in _GENERATORS[kind](t)]
    return BoundaryCurve(loops)
