"""Named, seed-derived random streams.

Every stochastic concern in a run (placement, keys, nonces, mobility,
batch randomizers, ...) pulls from its own ``random.Random`` stream
derived from the master seed and the stream name through SHA-256.  That
keeps runs reproducible bit for bit while letting unrelated concerns
draw in any order without perturbing each other.
"""

from __future__ import annotations

import hashlib
import random


def derive_seed(master_seed: int, name: str) -> int:
    material = f"{master_seed}:{name}".encode()
    return int.from_bytes(hashlib.sha256(material).digest()[:8], "big")


class RngHub:
    def __init__(self, master_seed: int):
        self.master_seed = master_seed
        self._streams: dict[str, random.Random] = {}

    def stream(self, name: str) -> random.Random:
        """The stream for ``name``; repeated calls share one generator."""
        if name not in self._streams:
            self._streams[name] = random.Random(derive_seed(self.master_seed, name))
        return self._streams[name]
