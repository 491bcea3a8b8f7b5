"""Seeded, counter-based random streams for reproducible trials.

Every consumer derives its generator from a master seed plus an integer
path, e.g. ``(trial, party)``.  The path is folded into a Philox key:
Philox is a counter-based PRF over its 128-bit key, so distinct keys give
independent streams, and the same (seed, path) always yields the same
stream regardless of what other streams were created or consumed.
"""

import numpy as np

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15  # odd multiplier, spreads short paths apart


def _fold_path(path: tuple[int, ...]) -> int:
    acc = 0
    mult = 1
    for p in path:
        acc = (acc + (int(p) + 1) * mult) & _MASK64
        mult = (mult * _GOLDEN) & _MASK64
    return acc


def derive_rng(master_seed: int, *path: int) -> np.random.Generator:
    """Generator for the stream identified by ``(master_seed, *path)``."""
    key = np.array(
        [int(master_seed) & _MASK64, _fold_path(path)], dtype=np.uint64
    )
    return np.random.Generator(np.random.Philox(key=key))
