"""Counter-based deterministic randomness.

Every draw is a pure function of its key tuple, so any component can be
replayed bit-identically without threading generator state through the
system. Keys are canonicalized (ints, strings) and hashed with blake2b.
"""

from __future__ import annotations

import hashlib
import math
from typing import Sequence

_KeyPart = int | str

_TWO53 = float(1 << 53)


def _digest(key: tuple[_KeyPart, ...]) -> bytes:
    h = hashlib.blake2b(digest_size=8)
    for part in key:
        if isinstance(part, bool):  # bool is an int subclass; be explicit
            part = int(part)
        if isinstance(part, int):
            h.update(b"i")
            h.update(str(part).encode())
        elif isinstance(part, str):
            h.update(b"s")
            h.update(part.encode())
        else:
            raise TypeError(f"rng key parts must be int or str, got {type(part)!r}")
        h.update(b"\x1f")
    return h.digest()


def u64(*key: _KeyPart) -> int:
    return int.from_bytes(_digest(key), "big")


def uniform(*key: _KeyPart) -> float:
    """Uniform in [0, 1), with 53 bits of precision."""
    return (u64(*key) >> 11) / _TWO53


def normal(*key: _KeyPart) -> float:
    """Standard normal via Box-Muller on two keyed uniforms."""
    u1 = uniform(*key, 0)
    u2 = uniform(*key, 1)
    # guard log(0); u1 == 0 has probability 2^-53 but determinism forbids retry loops
    u1 = max(u1, 2.0 ** -53)
    return math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)


def randint(lo: int, hi: int, *key: _KeyPart) -> int:
    """Uniform integer in [lo, hi] inclusive."""
    if hi < lo:
        raise ValueError("empty range")
    span = hi - lo + 1
    return lo + u64(*key) % span


def choice(seq: Sequence, *key: _KeyPart):
    if not seq:
        raise ValueError("choice from empty sequence")
    return seq[u64(*key) % len(seq)]
