"""Counter-based random streams.

Every random draw in this package is a pure function of a short integer
key: (seed, replica, time, site) for the disorder field, or
(seed, stream_id, counter) for sequential streams.  Keys are hashed with
the SplitMix64 finalizer (Stafford's mix13 variant), so coupled
processes, time-shifted starts, and parallel replicas all see the same
draw at the same (time, site) without any state being stored.

The same mixing function exists in three forms that must agree bit for
bit: `mix64` (scalar, Python ints), `mix64_array` (vectorized, uint64
numpy arrays), and the jitted copy inside `_fast`.
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1

_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB

# Domain-separation salts (hex digits of pi).
SEED_SALT = 0x243F6A8885A308D3
SITE_SALT = 0x13198A2E03707344
STREAM_SALT = 0xA4093822299F31D0
ZIG_SALT = 0x082EFA98EC4E6C89

#: unit in the last place of the 53-bit mantissa: draw = (bits >> 11) * U53
U53 = 2.0 ** -53


def mix64(x: int) -> int:
    """SplitMix64 finalizer on a 64-bit word (Python-int form)."""
    x &= MASK64
    x ^= x >> 30
    x = (x * _M1) & MASK64
    x ^= x >> 27
    x = (x * _M2) & MASK64
    x ^= x >> 31
    return x


def mix64_array(x: np.ndarray) -> np.ndarray:
    """Vectorized `mix64` on a uint64 array (returns a new array)."""
    x = x.astype(np.uint64, copy=True)
    x ^= x >> np.uint64(30)
    x *= np.uint64(_M1)
    x ^= x >> np.uint64(27)
    x *= np.uint64(_M2)
    x ^= x >> np.uint64(31)
    return x


def u64(x: int) -> int:
    """Two's-complement embedding of a signed int into 64 bits."""
    return x & MASK64


def stream_key(seed: int, replica: int) -> int:
    """Key of one replica's disorder stream."""
    return mix64(mix64(u64(seed) ^ SEED_SALT) ^ u64(replica))


def time_key(skey: int, n: int) -> int:
    """Per-time-step key derived from a stream key; n may be negative."""
    return mix64(u64(skey) ^ u64(n))


def time_keys_array(skeys: np.ndarray, n: int) -> np.ndarray:
    """`time_key` over a uint64 array of stream keys."""
    return mix64_array(skeys ^ np.uint64(u64(n)))


def site_keys(coords: np.ndarray) -> np.ndarray:
    """Per-site keys from canonical lattice coordinates.

    `coords` has shape (n_sites, d); each coordinate is folded in axis
    order so the key depends on the full vector, not on any enumeration
    of the geometry.
    """
    coords = np.atleast_2d(np.asarray(coords, dtype=np.int64))
    k = np.full(coords.shape[0], SITE_SALT, dtype=np.uint64)
    for axis in range(coords.shape[1]):
        k = mix64_array(k ^ coords[:, axis].astype(np.uint64))
    return k


def draw_keys(tkey: int, skeys: np.ndarray) -> np.ndarray:
    """Final per-draw hash words for one time step."""
    return mix64_array(np.uint64(tkey) ^ skeys)


def unit_from_keys(keys: np.ndarray) -> np.ndarray:
    """Uniform [0, 1) doubles from the top 53 bits of hash words."""
    return (keys >> np.uint64(11)).astype(np.float64) * U53


def signs_from_keys(keys: np.ndarray) -> np.ndarray:
    """Fair +-1.0 signs from bit 8 of hash words."""
    bit = (keys >> np.uint64(8)) & np.uint64(1)
    return 1.0 - 2.0 * bit.astype(np.float64)


class RandomStream:
    """Sequential deterministic stream handle.

    Draw i of stream (seed, stream_id) is a pure function of
    (seed, stream_id, i); the handle only tracks the position, so
    repeated runs from a fresh handle reproduce bit for bit.
    """

    def __init__(self, seed: int, stream_id: int = 0):
        self.seed = int(seed)
        self.stream_id = int(stream_id)
        self.counter = 0
        self._key = stream_key(seed, stream_id)

    def next_keys(self, size: int) -> np.ndarray:
        """Consume `size` positions and return their hash words."""
        idx = np.arange(self.counter, self.counter + size, dtype=np.uint64)
        self.counter += size
        inner = mix64_array(np.uint64(self._key) ^ idx)
        return mix64_array(inner ^ np.uint64(STREAM_SALT))

    def clone(self) -> "RandomStream":
        s = RandomStream(self.seed, self.stream_id)
        s.counter = self.counter
        return s
