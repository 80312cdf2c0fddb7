"""Deterministic seed handling.

One root seed feeds every random decision in the tool. Independent purposes
(cone shuffling, injection time sampling, per-target streams) get their own
generator derived from the root seed plus a short label, so adding a new
consumer never shifts the values an existing one sees.
"""

from __future__ import annotations

import hashlib
import random

# Generator identity recorded in manifests and tree exports so a rerun can
# verify it is replaying the same stream family.
PRNG_NAME = "mt19937"


def derive_seed(root: int, label: str) -> int:
    """Map (root seed, purpose label) to an independent 64-bit child seed."""
    digest = hashlib.sha256(f"{root}\x1f{label}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def derive_rng(root: int, label: str) -> random.Random:
    return random.Random(derive_seed(root, label))


def fisher_yates(items: list, rng: random.Random) -> list:
    # Pinned here instead of using random.shuffle so shuffles cannot drift
    # across interpreter versions; layouts on disk must stay replayable.
    out = list(items)
    for i in range(len(out) - 1, 0, -1):
        j = rng.randrange(i + 1)
        out[i], out[j] = out[j], out[i]
    return out
