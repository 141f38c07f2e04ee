"""Portable xoshiro256++ generator seeded through splitmix64.

Every stochastic choice in the package (initialisation, dropout masks,
shuffles, synthetic data, search candidates) draws from this generator so
that one integer seed reproduces a run bit-for-bit on any platform.
"""
from __future__ import annotations

import math
import zlib

import numpy as np

MASK64 = (1 << 64) - 1
_TWO_POW_M53 = 1.0 / (1 << 53)


def splitmix64(x: int) -> int:
    """One splitmix64 output for state ``x`` (state advanced by the golden gamma)."""
    z = (x + 0x9E3779B97F4A7C15) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def module_tag(name: str) -> int:
    return zlib.crc32(name.encode("utf-8"))


def derive_seed(master: int, name: str) -> int:
    """Per-module subseed: ``splitmix64(master XOR tag(name))``."""
    return splitmix64((master & MASK64) ^ module_tag(name))


def _rotl(x: int, k: int) -> int:
    return ((x << k) | (x >> (64 - k))) & MASK64


class Xoshiro256pp:
    """xoshiro256++ with the reference splitmix64 seeding."""

    def __init__(self, seed: int):
        s = []
        x = seed & MASK64
        for _ in range(4):
            s.append(splitmix64(x))
            x = (x + 0x9E3779B97F4A7C15) & MASK64
        self.s = s

    def next_u64(self) -> int:
        s0, s1, s2, s3 = self.s
        result = (_rotl((s0 + s3) & MASK64, 23) + s0) & MASK64
        t = (s1 << 17) & MASK64
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        s3 = _rotl(s3, 45)
        self.s = [s0, s1, s2, s3]
        return result

    def u64_array(self, n: int) -> np.ndarray:
        # inlined hot loop; dropout masks call this once per minibatch
        s0, s1, s2, s3 = self.s
        out = np.empty(n, dtype=np.uint64)
        for i in range(n):
            v = (s0 + s3) & MASK64
            out[i] = ((((v << 23) | (v >> 41)) & MASK64) + s0) & MASK64
            t = (s1 << 17) & MASK64
            s2 ^= s0
            s3 ^= s1
            s1 ^= s2
            s0 ^= s3
            s2 ^= t
            s3 = ((s3 << 45) | (s3 >> 19)) & MASK64
        self.s = [s0, s1, s2, s3]
        return out

    def random(self) -> float:
        """Uniform double in [0, 1) from the top 53 bits."""
        return (self.next_u64() >> 11) * _TWO_POW_M53

    def uniform_array(self, n: int, low: float = 0.0, high: float = 1.0) -> np.ndarray:
        u = (self.u64_array(n) >> np.uint64(11)).astype(np.float64) * _TWO_POW_M53
        if low == 0.0 and high == 1.0:
            return u
        return low + (high - low) * u

    def randbelow(self, n: int) -> int:
        """Unbiased integer in [0, n) by rejection."""
        if n <= 0:
            raise ValueError("n must be positive")
        limit = (1 << 64) - ((1 << 64) % n)
        while True:
            x = self.next_u64()
            if x < limit:
                return x % n

    def permutation(self, n: int) -> np.ndarray:
        """Fisher-Yates shuffle of ``range(n)``."""
        idx = list(range(n))
        for i in range(n - 1, 0, -1):
            j = self.randbelow(i + 1)
            idx[i], idx[j] = idx[j], idx[i]
        return np.asarray(idx, dtype=np.int64)

    def normal_array(self, n: int) -> np.ndarray:
        """Standard normals by Box-Muller; consumes two uniforms per pair."""
        m = (n + 1) // 2
        u = self.uniform_array(2 * m)
        u1 = 1.0 - u[:m]  # (0, 1], keeps log finite
        r = np.sqrt(-2.0 * np.log(u1))
        theta = 2.0 * math.pi * u[m:]
        z = np.concatenate([r * np.cos(theta), r * np.sin(theta)])
        return z[:n]

    def normal(self) -> float:
        return float(self.normal_array(1)[0])
