"""Hierarchical, collision-resistant seed derivation.

Every stage of every grid cell draws from its own stream, derived by hashing
the path master -> grid point -> repetition -> fold -> stage name.  Changing
one cell's path never perturbs another's stream.
"""

from __future__ import annotations

import hashlib

import numpy as np


def derive_seed(*parts) -> int:
    key = "\x1f".join(str(p) for p in parts).encode("utf-8")
    digest = hashlib.blake2b(key, digest_size=8).digest()
    return int.from_bytes(digest, "little")


class SeedTree:
    """Immutable path of labels; leaves hand out integer seeds and RNGs."""

    def __init__(self, master_seed: int, path: tuple = ()):
        self.master_seed = int(master_seed)
        self.path = tuple(path)

    def at(self, *labels) -> "SeedTree":
        return SeedTree(self.master_seed, self.path + tuple(str(x) for x in labels))

    def seed(self, name: str) -> int:
        return derive_seed(self.master_seed, *self.path, name)

    def rng(self, name: str) -> np.random.Generator:
        return np.random.default_rng(self.seed(name))
