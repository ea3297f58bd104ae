"""Counter-based random streams.

Every stochastic component draws from its own Philox stream keyed by
(seed, *tags), so adding a consumer never perturbs another component's
draws and runs are reproducible per (seed, config).
"""

import hashlib

import numpy as np

_MASK64 = (1 << 64) - 1


def _tag_to_int(tag):
    if isinstance(tag, (int, np.integer)):
        return int(tag) & _MASK64
    if isinstance(tag, str):
        digest = hashlib.blake2s(tag.encode("utf-8"), digest_size=8).digest()
        return int.from_bytes(digest, "little")
    raise TypeError(f"stream tag must be int or str, got {type(tag).__name__}")


def make_rng(seed, *tags):
    """Independent Generator for (seed, *tags); same key -> same stream."""
    key = [int(seed) & _MASK64] + [_tag_to_int(t) for t in tags]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(key)))


def derive_seed(seed, *tags):
    """Stable 63-bit child seed for handing to a subcomponent."""
    return int(make_rng(seed, *tags).integers(0, 2**63 - 1))
