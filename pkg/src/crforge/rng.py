"""Seed derivation.

Every random stream descends from one root seed through a fixed path:

    root seed -> module key -> unit index (trial, bin, ...)

so a trial can be replayed in isolation and results do not depend on how
trials are split across workers.
"""

import numpy as np

MODULE_KEYS = {
    "aep": 1,
    "jaep": 2,
    "consistency": 3,
    "lemma1": 4,
    "markov": 5,
    "codebook": 6,
    "protocol": 7,
    "link": 8,
    "capacity": 9,
}


def derive_rng(seed: int, module: str, *path: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), MODULE_KEYS[module], *map(int, path)]))


def derive_seed(seed: int, module: str, *path: int) -> int:
    """A 63-bit integer seed for handing to APIs that take plain ints."""
    return int(derive_rng(seed, module, *path).integers(0, 2**63 - 1))
