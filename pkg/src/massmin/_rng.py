"""Named, independent random streams derived from a single master seed.

Every randomized stage of the pipeline draws from its own counter-based
Philox stream so that toggling one stage (say, the surface loss) never
perturbs the sample sequence of another.  The splitting rule is
``SeedSequence([master_seed, PURPOSE_ID])`` with the purpose ids below;
it is part of the reproducibility contract and must not be reordered.
"""

from __future__ import annotations

import numpy as np

# Purpose ids are frozen; append new purposes at the end, never renumber.
_PURPOSES = {
    "init": 0,      # network weight and frequency initialization
    "ambient": 1,   # uniform ambient-space batches
    "surface": 2,   # area-weighted surface samples
    "eps": 3,       # hinge-loss offset draws
    "mass": 4,      # Monte-Carlo mass estimates during/after training
    "eval": 5,      # evaluation-time sampling (Chamfer distance)
}


def stream(seed: int, purpose: str) -> np.random.Generator:
    """Return the dedicated generator for ``purpose`` under ``seed``."""
    try:
        key = _PURPOSES[purpose]
    except KeyError:
        raise ValueError(f"unknown rng purpose {purpose!r}") from None
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, key])))
