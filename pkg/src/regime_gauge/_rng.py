"""Seeded, splittable random streams.

Every stochastic routine derives its generator from an integer seed plus a
tuple of integer keys (repetition index, stream id, ...).  Philox is a
counter-based bit generator, so streams for different keys are independent
and can be produced in any order without changing results.
"""

from __future__ import annotations

import numpy as np


def make_rng(seed: int, *keys: int) -> np.random.Generator:
    if seed < 0 or any(k < 0 for k in keys):
        raise ValueError("seed and stream keys must be non-negative integers")
    ss = np.random.SeedSequence([int(seed), *map(int, keys)])
    return np.random.Generator(np.random.Philox(ss))
