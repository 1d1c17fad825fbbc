"""Counter-keyed pseudorandomness.

All recorded instruction stacks are pure functions of (seed, site index,
instruction index), computed with a splitmix64-style keyed hash.  The same
arithmetic is reimplemented in the numba kernels (`_kernels.py`), so the fast
interval path and the reference engine produce bit-identical results.  A
vectorized numpy variant is provided for bulk statistical tests.
"""

from __future__ import annotations

import hashlib

import numpy as np

MASK64 = (1 << 64) - 1

GOLD1 = 0x9E3779B97F4A7C15
GOLD2 = 0xC2B2AE3D27D4EB4F
MIX1 = 0xBF58476D1CE4E5B9
MIX2 = 0x94D049BB133111EB


def mix64(x: int) -> int:
    """splitmix64 finalizer on a 64-bit integer."""
    x &= MASK64
    x = ((x ^ (x >> 30)) * MIX1) & MASK64
    x = ((x ^ (x >> 27)) * MIX2) & MASK64
    return x ^ (x >> 31)


def prf64(seed: int, a: int, b: int) -> int:
    """Keyed 64-bit hash of the pair (a, b); uniform on [0, 2^64)."""
    a = int(a)
    b = int(b)
    x = mix64((seed ^ (a * GOLD1)) & MASK64)
    return mix64((x ^ (b * GOLD2)) & MASK64)


def prf64_array(seed: int, a: int, b) -> np.ndarray:
    """Vectorized `prf64` over an array of b-values (a fixed)."""
    b = np.asarray(b, dtype=np.uint64)
    x = np.uint64(mix64((seed ^ (a * GOLD1)) & MASK64))
    y = x ^ (b * np.uint64(GOLD2))
    y = (y ^ (y >> np.uint64(30))) * np.uint64(MIX1)
    y = (y ^ (y >> np.uint64(27))) * np.uint64(MIX2)
    return y ^ (y >> np.uint64(31))


def _key_to_int(key) -> int:
    if isinstance(key, (int, np.integer)):
        return int(key) & MASK64
    if isinstance(key, str):
        digest = hashlib.blake2b(key.encode("utf-8"), digest_size=8).digest()
        return int.from_bytes(digest, "little")
    raise TypeError(f"unsupported seed-derivation key: {key!r}")


def derive_seed(master: int, *keys) -> int:
    """Derive a 64-bit sub-seed from a master seed and a key path.

    Used for the documented seed layering: master seed -> per-(module,
    replica) streams.  Strings are hashed with blake2b so the derivation is
    stable across processes and platforms.
    """
    s = int(master) & MASK64
    for key in keys:
        s = prf64(s, _key_to_int(key), 0xA5A5A5A5)
    return s
