"""Deterministic random number generation.

All stochastic behaviour in this package (shuffles, crop offsets, noise,
weight initialisation, dropout masks) flows through :class:`SplitMix64`.
The algorithm is part of the package's external contract so that an
independent implementation can reproduce every output bit for bit from a
seed alone:

* The k-th raw draw (k = 1, 2, ...) is ``mix64((seed + k*GAMMA) mod 2**64)``
  where ``GAMMA = 0x9E3779B97F4A7C15`` and ``mix64`` is the splitmix64
  finaliser (xor-shift 30, multiply 0xBF58476D1CE4E5B9, xor-shift 27,
  multiply 0x94D049BB133111EB, xor-shift 31).
* Uniform floats are ``(draw >> 11) * 2**-53``, in [0, 1).
* Standard normals are produced by Box-Muller from consecutive draw pairs
  (a, b): ``r = sqrt(-2*ln(((a >> 11) + 1) * 2**-53))``,
  ``theta = 2*pi*((b >> 11) * 2**-53)``, yielding ``r*cos(theta)`` then
  ``r*sin(theta)``. An odd request consumes a full pair and discards the
  trailing sin value; nothing is cached across calls.
* ``randbelow(n)`` is ``floor(u * n)`` for one uniform float u.
* Shuffles are Fisher-Yates from the top index down using ``randbelow``.
* Substreams derive as ``derive_seed(seed, key) =
  mix64(seed XOR mix64((key + GAMMA) mod 2**64))``, folded left over
  multiple keys.

Only integer and float64 arithmetic is used.
"""

from __future__ import annotations

import numpy as np

MASK64 = 0xFFFFFFFFFFFFFFFF
GAMMA = 0x9E3779B97F4A7C15

_U64_GAMMA = np.uint64(GAMMA)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_TWO_NEG53 = 2.0 ** -53


def mix64(z: int) -> int:
    """splitmix64 finaliser on a 64-bit integer."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def derive_seed(seed: int, *keys: int) -> int:
    """Derive an independent substream seed from (seed, keys)."""
    s = seed & MASK64
    for key in keys:
        s = mix64(s ^ mix64((key + GAMMA) & MASK64))
    return s


def _mix_array(z: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):
        z = (z ^ (z >> _S30)) * _M1
        z = (z ^ (z >> _S27)) * _M2
        return z ^ (z >> _S31)


class SplitMix64:
    """Counter-based splitmix64 stream; see the module docstring for the contract."""

    def __init__(self, seed: int):
        self._seed = seed & MASK64
        self._count = 0

    @property
    def draws_consumed(self) -> int:
        return self._count

    def _raw(self, n: int) -> np.ndarray:
        """Next n raw 64-bit draws as a uint64 array."""
        ks = np.arange(self._count + 1, self._count + n + 1, dtype=np.uint64)
        self._count += n
        with np.errstate(over="ignore"):
            states = np.uint64(self._seed) + ks * _U64_GAMMA
        return _mix_array(states)

    def next_uint64(self) -> int:
        self._count += 1
        return mix64((self._seed + self._count * GAMMA) & MASK64)

    def next_float64(self) -> float:
        return (self.next_uint64() >> 11) * _TWO_NEG53

    def floats(self, n: int) -> np.ndarray:
        """n uniform float64 values in [0, 1)."""
        return ((self._raw(n) >> _S11).astype(np.float64)) * _TWO_NEG53

    def normals(self, n: int) -> np.ndarray:
        """n standard-normal float64 values via Box-Muller."""
        if n <= 0:
            return np.empty(0, dtype=np.float64)
        pairs = (n + 1) // 2
        raw = self._raw(2 * pairs)
        u1 = ((raw[0::2] >> _S11).astype(np.float64) + 1.0) * _TWO_NEG53
        u2 = ((raw[1::2] >> _S11).astype(np.float64)) * _TWO_NEG53
        r = np.sqrt(-2.0 * np.log(u1))
        theta = 2.0 * np.pi * u2
        out = np.empty(2 * pairs, dtype=np.float64)
        out[0::2] = r * np.cos(theta)
        out[1::2] = r * np.sin(theta)
        return out[:n]

    def next_normal(self) -> float:
        return float(self.normals(1)[0])

    def randbelow(self, n: int) -> int:
        """Uniform integer in [0, n)."""
        if n <= 0:
            raise ValueError("randbelow requires n >= 1")
        return min(int(self.next_float64() * n), n - 1)

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates shuffle."""
        for i in range(len(items) - 1, 0, -1):
            j = self.randbelow(i + 1)
            items[i], items[j] = items[j], items[i]

    def permutation(self, n: int) -> list[int]:
        idx = list(range(n))
        self.shuffle(idx)
        return idx
