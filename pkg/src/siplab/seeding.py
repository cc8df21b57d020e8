"""Deterministic derivation of per-replica, per-stream random seeds.

A master seed plus a (replica index, stream label) pair is mixed through
``numpy.random.SeedSequence`` — master as entropy, replica and the
stable-hashed label as the spawn key — and collapsed to a single 64-bit
value.  The mapping is pure, platform-independent, and collision-tested.
"""

import hashlib

import numpy as np


def _label_key(label: str) -> int:
    digest = hashlib.sha256(label.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def derive_seed(master: int, replica: int, stream: str) -> int:
    """64-bit seed for one (replica, stream) pair under a master seed."""
    if replica < 0:
        raise ValueError("replica index must be nonnegative")
    seq = np.random.SeedSequence(entropy=master,
                                 spawn_key=(replica, _label_key(stream)))
    return int(seq.generate_state(1, dtype=np.uint64)[0])


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))
