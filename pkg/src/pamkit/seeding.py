"""Deterministic random streams: one user seed, one independent stream per stage."""
import zlib

import numpy as np


def rng_for(seed: int, stage: str) -> np.random.Generator:
    """Generator for ``stage`` derived from ``seed``; distinct stages never share draws."""
    return np.random.default_rng([int(seed) & (2**64 - 1), zlib.crc32(stage.encode())])
