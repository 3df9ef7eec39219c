"""Seedable, cross-platform-stable random streams.

Implements xoshiro256** with splitmix64 seeding so that episode replay is
byte-identical regardless of platform or library versions. Each subsystem
draws from its own stream, derived from the master seed and a fixed stream
name, so adding draws in one subsystem never perturbs another.
"""
from __future__ import annotations

import hashlib
import math

_MASK64 = (1 << 64) - 1


def _splitmix64(state: int) -> tuple[int, int]:
    state = (state + 0x9E3779B97F4A7C15) & _MASK64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return state, z ^ (z >> 31)


def _rotl(x: int, k: int) -> int:
    return ((x << k) | (x >> (64 - k))) & _MASK64


def stream_key(name: str) -> int:
    """Stable 64-bit id for a stream name (sha256-based, not hash())."""
    return int.from_bytes(hashlib.sha256(name.encode("utf-8")).digest()[:8], "big")


class Stream:
    """One xoshiro256** stream.

    ``normal`` uses the Marsaglia polar method and ``poisson`` the Knuth
    product method; both consume only ``random()`` so the draw sequence is
    fully determined by the core generator.
    """

    def __init__(self, seed: int, name: str = ""):
        state = (int(seed) ^ stream_key(name)) & _MASK64
        s = []
        for _ in range(4):
            state, out = _splitmix64(state)
            s.append(out)
        if not any(s):
            s[0] = 1  # all-zero state is invalid for xoshiro
        self._s = s
        self._spare_normal: float | None = None

    def next_u64(self) -> int:
        s0, s1, s2, s3 = self._s
        result = (_rotl((s1 * 5) & _MASK64, 7) * 9) & _MASK64
        t = (s1 << 17) & _MASK64
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        s3 = _rotl(s3, 45)
        self._s = [s0, s1, s2, s3]
        return result

    def random(self) -> float:
        """Uniform float in [0, 1) with 53 bits of precision."""
        return (self.next_u64() >> 11) * (2.0 ** -53)

    def uniform(self, lo: float, hi: float) -> float:
        return lo + (hi - lo) * self.random()

    def normal(self, mu: float = 0.0, sigma: float = 1.0) -> float:
        if self._spare_normal is not None:
            z = self._spare_normal
            self._spare_normal = None
            return mu + sigma * z
        while True:
            u = 2.0 * self.random() - 1.0
            v = 2.0 * self.random() - 1.0
            r2 = u * u + v * v
            if 0.0 < r2 < 1.0:
                break
        scale = math.sqrt(-2.0 * math.log(r2) / r2)
        self._spare_normal = v * scale
        return mu + sigma * u * scale

    def poisson(self, lam: float) -> int:
        if lam <= 0.0:
            return 0
        limit = math.exp(-lam)
        k = 0
        p = self.random()
        while p > limit:
            k += 1
            p *= self.random()
        return k

    def coin(self) -> bool:
        return self.next_u64() & 1 == 1

    def randint(self, n: int) -> int:
        """Uniform integer in [0, n) (rejection-free; fine for small n)."""
        return self.next_u64() % n


class StreamSet:
    """Lazily creates one named stream per subsystem from a master seed."""

    def __init__(self, master_seed: int):
        self.master_seed = int(master_seed) & _MASK64
        self._streams: dict[str, Stream] = {}

    def get(self, name: str) -> Stream:
        if name not in self._streams:
            self._streams[name] = Stream(self.master_seed, name)
        return self._streams[name]
