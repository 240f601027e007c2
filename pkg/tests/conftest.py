"""Shared test oracles.

ReferenceStream is a deliberately plain, loop-based transliteration of the
generator contract documented in smearkit.rng. It shares no code with the
package implementation (which is vectorized), so agreement between the two
is meaningful evidence that both follow the written contract.
"""

import math

import numpy as np

MASK64 = 0xFFFFFFFFFFFFFFFF
REF_GAMMA = 0x9E3779B97F4A7C15


def ref_mix64(z: int) -> int:
    z &= MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return (z ^ (z >> 31)) & MASK64


def ref_derive_seed(seed: int, *keys: int) -> int:
    s = seed & MASK64
    for key in keys:
        s = ref_mix64(s ^ ref_mix64((key + REF_GAMMA) & MASK64))
    return s


class ReferenceStream:
    """Pure-integer counter stream: draw k is mix64(seed + k * gamma)."""

    def __init__(self, seed: int):
        self.seed = seed & MASK64
        self.k = 0

    def next_u64(self) -> int:
        self.k += 1
        return ref_mix64((self.seed + self.k * REF_GAMMA) & MASK64)

    def next_float(self) -> float:
        return (self.next_u64() >> 11) * 2.0 ** -53

    def normal_pair(self) -> tuple[float, float]:
        a, b = self.next_u64(), self.next_u64()
        u1 = ((a >> 11) + 1) * 2.0 ** -53
        u2 = (b >> 11) * 2.0 ** -53
        r = math.sqrt(-2.0 * math.log(u1))
        theta = 2.0 * math.pi * u2
        return r * math.cos(theta), r * math.sin(theta)

    def normals(self, n: int) -> list[float]:
        out: list[float] = []
        while len(out) < n:
            out.extend(self.normal_pair())
        return out[:n]

    def randbelow(self, n: int) -> int:
        return min(int(self.next_float() * n), n - 1)

    def shuffle(self, items: list) -> None:
        for i in range(len(items) - 1, 0, -1):
            j = self.randbelow(i + 1)
            items[i], items[j] = items[j], items[i]


def random_image(shape, seed, channels=3) -> np.ndarray:
    """Deterministic uint8 test image from numpy's stable Philox stream."""
    gen = np.random.Generator(np.random.Philox(seed))
    h, w = shape
    return gen.integers(0, 256, size=(h, w, channels), dtype=np.uint8)
