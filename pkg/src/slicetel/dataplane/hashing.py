"""Seeded 64-bit hash family for the bucket arrays."""

from __future__ import annotations

MASK64 = (1 << 64) - 1


def mix64(x: int) -> int:
    """splitmix64 finalizer: a bijective avalanche mix on 64-bit words."""
    x &= MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK64
    return x ^ (x >> 31)


def derive_seeds(seed: int, d: int) -> tuple[int, ...]:
    """``d`` well-separated 64-bit seeds from one configuration seed."""
    out = []
    state = seed & MASK64
    for _ in range(d):
        state = (state + 0x9E3779B97F4A7C15) & MASK64
        out.append(mix64(state))
    return tuple(out)


def pack_key(slice_id: int, path_id: int, port: int) -> int:
    """Pack a (slice, path, port) key into one 64-bit word (32 | 16 | 16 bits)."""
    return ((slice_id & 0xFFFFFFFF) << 32) | ((path_id & 0xFFFF) << 16) | (port & 0xFFFF)


class HashFamily:
    """``d`` independent hash functions mapping keys to ``[0, w)``."""

    def __init__(self, d: int, w: int, seed: int = 0):
        if d < 1 or w < 1:
            raise ValueError("hash family needs d >= 1 and w >= 1")
        self.d = d
        self.w = w
        self.seeds = derive_seeds(seed, d)

    def index(self, i: int, key) -> int:
        return mix64(pack_key(*key) ^ self.seeds[i]) % self.w

    def indices(self, key) -> tuple[int, ...]:
        word = pack_key(*key)
        w = self.w
        return tuple(mix64(word ^ s) % w for s in self.seeds)
