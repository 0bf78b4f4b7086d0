"""Deterministic derivation of component seeds from one experiment seed.

Every source of randomness in an experiment run is seeded with
``derive_seed(root_seed, label)`` for a fixed string label, so a single
integer reproduces the whole experiment bit for bit.
"""

import hashlib


def derive_seed(root_seed: int, label: str) -> int:
    """Map (root_seed, label) to a stable non-negative 63-bit seed.

    The derivation is sha256(f"{root_seed}:{label}") truncated to its first
    8 little-endian bytes with the sign bit cleared. It is platform- and
    process-independent.
    """
    digest = hashlib.sha256(f"{root_seed}:{label}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little") & 0x7FFF_FFFF_FFFF_FFFF
