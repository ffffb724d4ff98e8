"""Deterministic seed derivation.

All randomness in the pipeline flows from one root seed. Submodules derive
their own streams by hashing the root together with string labels, so adding
a consumer never perturbs the streams of existing ones. blake2b keeps the
derivation stable across platforms and Python versions (unlike hash()).
"""

import hashlib

import numpy as np


def derive_seed(root_seed: int, *labels: object) -> int:
    """Derive a 64-bit child seed from a root seed and a label path."""
    h = hashlib.blake2b(digest_size=8)
    h.update(str(int(root_seed)).encode())
    for label in labels:
        h.update(b"/")
        h.update(str(label).encode())
    return int.from_bytes(h.digest(), "little")


def generator(root_seed: int, *labels: object) -> np.random.Generator:
    """A numpy Generator seeded by the derived child seed."""
    return np.random.Generator(np.random.PCG64(derive_seed(root_seed, *labels)))
