"""
Seed derivation.

Every random stream is keyed by a tuple of integers (master seed, drop index,
position, stream tag) so grid points, drops and positions are reproducible
independently of execution order. Integer key parts must fit in 32 bits.
"""

from typing import Union

import numpy as np

MAX_SEED = 2**32 - 1

STREAMS = {
    "geometry": 1,
    "reception": 2,
    "dataset": 3,
    "subsample": 4,
    "train": 5,
    "bernstein": 6,
    "calibration": 7,
}


def _key(part: Union[int, str]) -> int:
    if isinstance(part, str):
        return STREAMS[part]
    value = int(part)
    if not 0 <= value <= MAX_SEED:
        raise ValueError(f"Seed key {value} outside [0, {MAX_SEED}]")
    return value


def derive_seed(*parts: Union[int, str]) -> int:
    """Hash the key parts into a 32-bit seed."""
    sequence = np.random.SeedSequence([_key(p) for p in parts])
    return int(sequence.generate_state(1, dtype=np.uint32)[0])


def derive_rng(*parts: Union[int, str]) -> np.random.Generator:
    return np.random.default_rng(derive_seed(*parts))


def as_seed(rng: Union[int, np.random.Generator]) -> int:
    """Accept either a master seed or a Generator and return an integer seed."""
    if isinstance(rng, np.random.Generator):
        return int(rng.integers(0, 2**32 - 1))
    return int(rng)
