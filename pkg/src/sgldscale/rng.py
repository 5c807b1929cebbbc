"""Counter-based random streams.

Every random number used by the simulators is a pure function of
``(master_seed, row, stream, counter)``. That is what makes ensembles
bit-identical regardless of chunking or thread count: a replicate never
consumes state shared with another replicate.

The mixer is the splitmix64 finalizer (Steele, Lea and Flood 2014):

    row_seed(master, r) = mix64(master + GOLDEN * (r + 1))
    key(row_seed, s)    = mix64(row_seed ^ mix64(GOLDEN * s))
    word(key, c)        = mix64(key + GOLDEN * (c + 1))

All arithmetic is modulo 2**64. Uniform doubles take the top 53 bits,
normals go through the inverse normal CDF on the open interval.
"""
from __future__ import annotations

import zlib

import numpy as np
from scipy.special import ndtri

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_INV53 = 1.0 / 9007199254740992.0  # 2**-53

# stream ids, fixed for reproducibility
BATCH = 1
GAUSS = 2
SWAP_K = 3
SWAP_BATCH = 4
SWAP_GAUSS = 5
OU_GAUSS = 6
AUX = 7

MASK64 = (1 << 64) - 1


def mix64(z) -> np.ndarray:
    """splitmix64 finalizer applied elementwise to a uint64 array."""
    z = np.array(z, dtype=np.uint64, copy=True)
    with np.errstate(over="ignore"):
        z ^= z >> np.uint64(30)
        z *= _M1
        z ^= z >> np.uint64(27)
        z *= _M2
        z ^= z >> np.uint64(31)
    return z


def mix64_int(z: int) -> int:
    """Scalar version of :func:`mix64` on python ints (used for seeds)."""
    z &= MASK64
    z ^= z >> 30
    z = (z * 0xBF58476D1CE4E5B9) & MASK64
    z ^= z >> 27
    z = (z * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def check_seed(seed) -> int:
    seed = int(seed)
    if seed < 0 or seed > MASK64:
        raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed}")
    return seed


def derive_seed(master_seed: int, tag: str) -> int:
    """Child master seed for a named sub-experiment."""
    salt = zlib.crc32(tag.encode("utf-8"))
    return mix64_int(check_seed(master_seed) ^ mix64_int(salt + 0x632BE59BD9B4E019))


def row_seeds(master_seed: int, rows) -> np.ndarray:
    rows = np.asarray(rows, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = np.uint64(check_seed(master_seed)) + GOLDEN * (rows + np.uint64(1))
    return mix64(z)


class CounterStream:
    """Random numbers for a block of replicate rows.

    Methods return arrays with one leading axis per row, so a block of R rows
    is simulated with vectorised numpy code while every entry still depends
    only on its own (row, stream, counter).
    """

    def __init__(self, master_seed: int, rows):
        self.master_seed = check_seed(master_seed)
        self.rows = np.atleast_1d(np.asarray(rows, dtype=np.uint64))
        self._seeds = row_seeds(self.master_seed, self.rows)
        self._keys: dict[int, np.ndarray] = {}

    def __len__(self):
        return len(self.rows)

    def _key(self, stream: int) -> np.ndarray:
        key = self._keys.get(stream)
        if key is None:
            with np.errstate(over="ignore"):
                salt = mix64(GOLDEN * np.uint64(stream))
            key = mix64(self._seeds ^ salt)
            self._keys[stream] = key
        return key

    def words(self, stream: int, counters) -> np.ndarray:
        """Raw 64-bit words, shape (rows, len(counters))."""
        c = np.atleast_1d(np.asarray(counters, dtype=np.uint64))
        key = self._key(stream)
        with np.errstate(over="ignore"):
            z = key[:, None] + GOLDEN * (c[None, :] + np.uint64(1))
        return mix64(z)

    def uniform(self, stream: int, counters) -> np.ndarray:
        """Doubles in [0, 1) with 53 random bits."""
        return (self.words(stream, counters) >> np.uint64(11)).astype(np.float64) * _INV53

    def normal(self, stream: int, counters) -> np.ndarray:
        top = (self.words(stream, counters) >> np.uint64(11)).astype(np.float64)
        return ndtri((top + 0.5) * _INV53)

    def integers(self, stream: int, counters, n: int) -> np.ndarray:
        """Indices uniform on {0, ..., n-1}."""
        idx = np.floor(self.uniform(stream, counters) * n).astype(np.int64)
        return np.minimum(idx, n - 1)
