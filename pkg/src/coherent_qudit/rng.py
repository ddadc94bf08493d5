"""Seeded random sources.

Every stochastic routine takes either a ``numpy.random.Generator`` or an
integer seed. Integer seeds go through :func:`derive_rng`, a counter-based
Philox generator keyed by ``(seed, index, stream)``, so shard ``i`` of a run
replays identically on any platform regardless of how shards are scheduled.
"""

from __future__ import annotations

import os
from typing import Optional

import numpy as np

SEED_ENV_VAR = "COHERENT_QUDIT_SEED"
_MASK64 = (1 << 64) - 1


def default_seed() -> int:
    return int(os.environ.get(SEED_ENV_VAR, "0"))


def derive_rng(seed: int, index: int = 0, stream: int = 0) -> np.random.Generator:
    """Philox4x64 generator keyed by ``seed`` (low 64 bits) and ``(index, stream)``.

    ``index`` < 2**48 and ``stream`` < 2**16 share the high 64 bits of the key.
    """
    if not 0 <= index < 1 << 48 or not 0 <= stream < 1 << 16:
        raise ValueError("index or stream out of range")
    key = (seed & _MASK64) | (((index << 16) | stream) << 64)
    return np.random.Generator(np.random.Philox(key=key))


def as_rng(rng) -> tuple[np.random.Generator, Optional[int]]:
    """Normalise ``rng`` to ``(generator, seed_or_None)``."""
    if isinstance(rng, np.random.Generator):
        return rng, None
    if rng is None:
        seed = default_seed()
        return derive_rng(seed), seed
    seed = int(rng)
    return derive_rng(seed), seed


def sample_index(probs: np.ndarray, rng: np.random.Generator) -> int:
    """Inverse-CDF draw consuming exactly one uniform.

    Callers sharing a seed therefore draw paired outcomes, which makes
    distribution comparisons between two measurement routes tight.
    """
    cdf = np.cumsum(probs)
    u = rng.random() * cdf[-1]
    return int(min(np.searchsorted(cdf, u, side="right"), len(probs) - 1))
