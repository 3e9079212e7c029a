"""Counter-based keyed hashing.

Every random bit the simulator consumes on the dynamics side (coin flips of
the contact processes, truth-table entries of Boolean functions) is a pure
function of a key tuple.  Replays and couplings are therefore exact: two runs
that ask for the same key get the same number, whatever order they ask in.

The mixer is SplitMix64's finalizer applied to a running 64-bit state.
"""

from __future__ import annotations

import struct

import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_MASK64 = (1 << 64) - 1

# Stream tags keep unrelated consumers of one master seed apart.
TAG_FORWARD = 0x46
TAG_DUAL = 0x44
TAG_BOOLEAN = 0x42
TAG_SEED = 0x53


def mix64(x: np.ndarray) -> np.ndarray:
    """SplitMix64 finalizer, elementwise on a uint64 array."""
    x = np.asarray(x, dtype=np.uint64)
    with np.errstate(over="ignore"):
        x = (x ^ (x >> np.uint64(30))) * _M1
        x = (x ^ (x >> np.uint64(27))) * _M2
    return x ^ (x >> np.uint64(31))


def _u64(word) -> np.ndarray:
    if isinstance(word, (int, np.integer)):
        return np.array([int(word) & _MASK64], dtype=np.uint64)[0]
    return np.asarray(word).astype(np.uint64)


def hash_words(*words) -> np.ndarray:
    """Hash a sequence of 64-bit words (scalars or broadcastable arrays)."""
    h = np.uint64(0x6A09E667F3BCC909)
    with np.errstate(over="ignore"):
        for w in words:
            h = mix64((h ^ _u64(w)) + _GOLDEN)
    return h


def to_unit(h: np.ndarray) -> np.ndarray:
    """Map 64-bit hashes to floats in [0, 1) using the top 53 bits."""
    return (np.asarray(h, dtype=np.uint64) >> np.uint64(11)).astype(np.float64) * (2.0 ** -53)


def float_word(x: float) -> int:
    """The IEEE-754 bit pattern of ``x`` as an integer, for hashing reals."""
    return struct.unpack("<Q", struct.pack("<d", float(x)))[0]


def derive_seed(master_seed: int, *parts) -> int:
    """Derive a child seed from a master seed and integer/float parts."""
    words = [TAG_SEED, int(master_seed)]
    for p in parts:
        words.append(float_word(p) if isinstance(p, float) else int(p))
    return int(hash_words(*words))


class CoinStream:
    """Uniform variates keyed by ``(seed, tag, t, node)``.

    >>> coins = CoinStream(7)
    >>> bool(np.all(coins.uniform(3, np.arange(4)) == coins.uniform(3, np.arange(4))))
    True
    """

    def __init__(self, seed: int, tag: int = TAG_FORWARD):
        self.seed = int(seed)
        self.tag = int(tag)

    def uniform(self, t: int, nodes: np.ndarray) -> np.ndarray:
        nodes = np.asarray(nodes, dtype=np.int64)
        return to_unit(hash_words(self.tag, self.seed, int(t), nodes))

    def flips(self, t: int, nodes: np.ndarray, q: float) -> np.ndarray:
        """Boolean success indicators with probability ``q`` per node."""
        return self.uniform(t, nodes) < q

    def __repr__(self) -> str:
        return f"CoinStream(seed={self.seed}, tag={self.tag:#x})"
