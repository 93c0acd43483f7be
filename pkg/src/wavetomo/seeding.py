"""Deterministic RNG streams derived from a single master seed.

Every consumer of randomness asks for a stream keyed by a (domain, *indices)
path, e.g. ("noise", sensor_index, step) or ("screen", layer_index).  Streams
are independent and reproducible regardless of evaluation order or thread
count.
"""

import numpy as np

# fixed domain tags; adding new ones is fine, renaming breaks reproducibility
_DOMAINS = {
    "screen": 1,
    "noise": 2,
    "test": 3,
}


def rng_for(master_seed: int, domain: str, *indices: int) -> np.random.Generator:
    """Return a Generator for the stream identified by (domain, *indices)."""
    key = (int(master_seed), _DOMAINS[domain]) + tuple(int(i) for i in indices)
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(key)))
