"""Named random sub-streams derived from one global seed."""
from __future__ import annotations

import zlib

import numpy as np


def _key(part) -> int:
    if isinstance(part, (int, np.integer)) and part >= 0:
        return int(part)
    return zlib.crc32(str(part).encode("utf-8"))


def derive_seed(seed: int, *names) -> int:
    """Deterministic 32-bit seed for the sub-stream ``names`` of ``seed``."""
    ss = np.random.SeedSequence([int(seed)] + [_key(n) for n in names])
    return int(ss.generate_state(1)[0])


def derive_rng(seed: int, *names) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed)] + [_key(n) for n in names]))
