"""Named random sub-streams derived from one experiment seed.

Every stochastic stage (split, ga, train, ...) pulls its generator from
here, so stages can be re-run independently without disturbing each other.
"""

from __future__ import annotations

import zlib

import numpy as np


def subrng(seed: int, stream: str) -> np.random.Generator:
    """Generator for a named sub-stream of the master seed."""
    return np.random.default_rng(
        np.random.SeedSequence([int(seed), zlib.crc32(stream.encode("utf-8"))])
    )
