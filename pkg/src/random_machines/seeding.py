"""Deterministic seed derivation helpers.

All randomness in the package flows through numpy Generators seeded from
64-bit integers.  Child streams are derived with SeedSequence so that
results are independent of evaluation order or parallel scheduling.
"""
from __future__ import annotations

import zlib

import numpy as np

_MASK64 = (1 << 64) - 1


def mix_seed(*parts) -> int:
    """Collapse ints and strings into one 64-bit seed, order-sensitive."""
    entropy = []
    for part in parts:
        if isinstance(part, str):
            entropy.append(zlib.crc32(part.encode("utf-8")))
        else:
            entropy.append(int(part) & _MASK64)
    ss = np.random.SeedSequence(entropy)
    return int(ss.generate_state(1, np.uint64)[0])


def seed_from(ss: np.random.SeedSequence) -> int:
    """Draw a single 64-bit seed from a SeedSequence without consuming spawns."""
    return int(ss.generate_state(1, np.uint64)[0])
