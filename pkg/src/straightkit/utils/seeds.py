"""
Seed derivation.

All randomness flows from one master seed. Sub-seeds are drawn from
numpy's SeedSequence with a stream-specific spawn key, so every consumer
gets an independent, order-free stream.
"""

import numpy as np

from straightkit.utils.errors import InvalidArgumentError

# Spawn-key streams used outside the augmentation module
INIT_GENERATOR = 10
INIT_DISCRIMINATOR = 11
BATCH_ORDER = 12
DROPOUT = 13
SYNTH = 14


def _sequence(seed, stream):
    if int(seed) < 0:
        raise InvalidArgumentError(f"seed must be a non-negative integer, got {seed}")
    return np.random.SeedSequence(int(seed), spawn_key=tuple(int(s) for s in stream))


def derive_seed(seed, *stream):
    """32-bit sub-seed for the given stream of the master seed"""
    return int(_sequence(seed, stream).generate_state(1, dtype=np.uint32)[0])


def stream_rng(seed, *stream):
    return np.random.default_rng(_sequence(seed, stream))
