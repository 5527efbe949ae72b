"""Seeded counter-based random streams.

All stochastic operations take an explicit integer seed. Streams are
Philox generators keyed through ``SeedSequence`` so that a master seed
plus a tuple of integer keys (repetition index, stream purpose) always
maps to the same independent stream, whatever order the streams are
created in.
"""
from __future__ import annotations

import numpy as np

# Stream purposes used as the last key when one seed feeds several draws
STREAM_TRAIN = 0
STREAM_HOLDOUT = 1
STREAM_LAMBDA = 2
STREAM_BETA = 3


def make_rng(seed: int, *keys: int) -> np.random.Generator:
    """Return a Philox generator for ``seed`` and the optional spawn keys."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in keys))
    return np.random.Generator(np.random.Philox(ss))


def derive_seed(seed: int, *keys: int) -> int:
    """Derive a child 64-bit seed from ``seed`` and integer keys.

    The derivation is a pure function of its arguments, which is what
    lets parallel repetitions reproduce the serial run exactly.
    """
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in keys))
    return int(ss.generate_state(1, dtype=np.uint64)[0])
