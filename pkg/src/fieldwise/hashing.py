"""Deterministic hashes for feature indexing and content digests.

The 32-bit FNV-1a feature hash is part of the on-disk model contract:
weight rows are addressed by these indices, so the function is frozen —
stable across runs, platforms, and releases.
"""

from __future__ import annotations

import hashlib
from functools import lru_cache

from .errors import ContractError

FNV32_OFFSET = 0x811C9DC5
FNV32_PRIME = 0x01000193
FNV64_OFFSET = 0xCBF29CE484222325
FNV64_PRIME = 0x00000100000001B3

# Unit-separator byte between field name and token keeps ("ab","c") and
# ("a","bc") from colliding.
FIELD_TOKEN_SEP = b"\x1f"

MIN_HASH_BITS = 10
MAX_HASH_BITS = 29


def fnv1a32(data: bytes) -> int:
    h = FNV32_OFFSET
    for b in data:
        h = ((h ^ b) * FNV32_PRIME) & 0xFFFFFFFF
    return h


def fnv1a64(data: bytes) -> int:
    h = FNV64_OFFSET
    for b in data:
        h = ((h ^ b) * FNV64_PRIME) & 0xFFFFFFFFFFFFFFFF
    return h


@lru_cache(maxsize=1 << 20)
def hash_feature(field_name: str, token: str, hash_bits: int) -> int:
    """Map (field, token) to a stable index below ``2**hash_bits``."""
    if not MIN_HASH_BITS <= hash_bits <= MAX_HASH_BITS:
        raise ContractError(
            f"hash_bits must be in [{MIN_HASH_BITS}, {MAX_HASH_BITS}], got {hash_bits}"
        )
    data = field_name.encode("utf-8") + FIELD_TOKEN_SEP + token.encode("utf-8")
    return fnv1a32(data) & ((1 << hash_bits) - 1)


def content_digest(data) -> int:
    """64-bit digest of a byte buffer, used to key patches against their base.

    blake2b-64 rather than a hand-rolled loop: digests cover multi-megabyte
    weight files and must stay off the critical path.
    """
    return int.from_bytes(hashlib.blake2b(data, digest_size=8).digest(), "little")
