"""Quenched Boolean network dynamics with random biased truth tables.

Truth tables are never stored.  The entry of node ``x`` for input pattern
``v`` is ``to_unit(hash(seed, x, v)) < p``; the hash is a pure function of
its key, so the tables are fixed for the lifetime of the oracle exactly as if
they had been drawn at time 0.  Patterns are read from the inputs in stored
order, least significant bit first, packed into 64-bit words.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Optional

import numpy as np

from .graphgen import DirectedGraph
from .errors import MemoCapError, PreconditionError
from .keyed import TAG_BOOLEAN, hash_words, mix64, to_unit, _GOLDEN

DEFAULT_MEMO_CAP = 10**7


def _fold(h: np.ndarray, w: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):
        return mix64((h ^ w.astype(np.uint64)) + _GOLDEN)


class BooleanFunctionOracle:
    """Lazily realized truth tables ``f_x`` with expression bias ``p``.

    ``pinned`` fixes chosen entries, keyed by ``(node, pattern)`` where
    ``pattern`` is the integer whose bit j is the state of the j-th input.
    With ``memoize=True`` every realized entry is recorded in ``memo`` (up to
    ``memo_cap`` entries) for inspection; the values do not depend on it.
    """

    def __init__(self, master_seed: int, p: float,
                 pinned: Optional[Mapping[tuple[int, int], int]] = None,
                 memoize: bool = False, memo_cap: int = DEFAULT_MEMO_CAP):
        if not 0.0 <= p <= 1.0:
            raise PreconditionError(f"bias must lie in [0, 1], got {p!r}")
        self.master_seed = int(master_seed)
        self.p = float(p)
        self.pinned = {(int(x), int(v)): int(b) for (x, v), b in (pinned or {}).items()}
        if len(self.pinned) > memo_cap:
            raise MemoCapError(f"{len(self.pinned)} pinned entries exceed the cap {memo_cap}")
        self.memoize = memoize
        self.memo_cap = memo_cap
        self.memo: dict[tuple[int, int], int] = {}

    def entry(self, x: int, pattern: int, degree: int) -> int:
        """One truth-table entry.  Scalar path, independent of ``evaluate``."""
        key = (int(x), int(pattern))
        if key in self.pinned:
            return self.pinned[key]
        nwords = -(-degree // 64)
        words = [(pattern >> (64 * i)) & ((1 << 64) - 1) for i in range(nwords)]
        h = hash_words(TAG_BOOLEAN, self.master_seed, x, *words)
        return int(to_unit(h) < self.p)

    def evaluate(self, g: DirectedGraph, state: np.ndarray) -> np.ndarray:
        """``f_x`` applied to the current inputs of every node, as a uint8 array."""
        n = g.n
        deg = g.in_degrees
        nwords = (deg + 63) // 64
        word_ptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(nwords, out=word_ptr[1:])
        words = np.zeros(int(word_ptr[-1]), dtype=np.uint64)
        if g.num_edges:
            row = np.repeat(np.arange(n, dtype=np.int64), deg)
            pos = np.arange(g.num_edges, dtype=np.int64) - g.in_ptr[row]
            bits = state[g.in_idx].astype(np.uint64)
            contrib = bits << (pos & 63).astype(np.uint64)
            np.bitwise_or.at(words, word_ptr[row] + (pos >> 6), contrib)

        nodes = np.arange(n, dtype=np.int64)
        h = hash_words(TAG_BOOLEAN, self.master_seed, nodes)
        for i in range(int(nwords.max()) if n else 0):
            live = np.flatnonzero(nwords > i)
            h[live] = _fold(h[live], words[word_ptr[live] + i])
        out = (to_unit(h) < self.p).astype(np.uint8)

        if self.pinned or self.memoize:
            patterns = self._patterns(words, word_ptr)
            for (x, v), b in self.pinned.items():
                if x < n and patterns[x] == v:
                    out[x] = b
            if self.memoize:
                for x in range(n):
                    self.memo[(x, patterns[x])] = int(out[x])
                if len(self.memo) > self.memo_cap:
                    raise MemoCapError(f"memo exceeded {self.memo_cap} entries")
        return out

    @staticmethod
    def _patterns(words: np.ndarray, word_ptr: np.ndarray) -> list[int]:
        pats = []
        for x in range(len(word_ptr) - 1):
            v = 0
            for i, w in enumerate(words[word_ptr[x]:word_ptr[x + 1]].tolist()):
                v |= int(w) << (64 * i)
            pats.append(v)
        return pats


def bn_step(g: DirectedGraph, oracle: BooleanFunctionOracle, state: np.ndarray) -> np.ndarray:
    """Synchronous update: every node reads its inputs and applies its table."""
    state = np.asarray(state, dtype=np.uint8)
    if state.shape != (g.n,):
        raise PreconditionError(f"state has length {state.size}, graph has {g.n} nodes")
    return oracle.evaluate(g, state)


@dataclass(frozen=True)
class Attractor:
    """Transient and cycle lengths; both ``None`` when censored at ``t_max``."""

    transient_length: Optional[int]
    cycle_length: Optional[int]
    steps: int

    @property
    def censored(self) -> bool:
        return self.cycle_length is None


def find_attractor(g: DirectedGraph, oracle: BooleanFunctionOracle, state0, t_max: int) -> Attractor:
    """Iterate until a state repeats.  States are compared exactly, via their packed bytes."""
    if t_max < 1:
        raise PreconditionError("t_max must be >= 1")
    state = np.asarray(state0, dtype=np.uint8)
    seen = {np.packbits(state).tobytes(): 0}
    for t in range(1, t_max + 1):
        state = bn_step(g, oracle, state)
        key = np.packbits(state).tobytes()
        first = seen.get(key)
        if first is not None:
            return Attractor(first, t - first, t)
        seen[key] = t
    return Attractor(None, None, t_max)


def trajectory(g: DirectedGraph, oracle: BooleanFunctionOracle, state0, horizon: int):
    """Densities of ones for t = 0..horizon and of changes for t = 1..horizon."""
    if horizon < 1:
        raise PreconditionError("horizon must be >= 1")
    state = np.asarray(state0, dtype=np.uint8)
    ones = np.empty(horizon + 1)
    zeta = np.empty(horizon)
    ones[0] = state.mean() if g.n else 0.0
    for t in range(1, horizon + 1):
        nxt = bn_step(g, oracle, state)
        zeta[t - 1] = np.count_nonzero(nxt != state) / g.n
        ones[t] = nxt.mean()
        if zeta[t - 1] == 0.0:
            # Fixed point: nothing changes from here on.
            ones[t:] = ones[t]
            zeta[t - 1:] = 0.0
            break
        state = nxt
    return ones, zeta


def change_process(g: DirectedGraph, oracle: BooleanFunctionOracle, state0, horizon: int) -> np.ndarray:
    """Fraction of nodes whose state changed between t-1 and t, for t = 1..horizon."""
    return trajectory(g, oracle, state0, horizon)[1]


def format_trajectory_csv(ones: np.ndarray, zeta: np.ndarray) -> str:
    lines = ["t,density_ones,zeta_density"]
    lines.append(f"0,{ones[0]:.10g},")
    for t in range(1, len(ones)):
        lines.append(f"{t},{ones[t]:.10g},{zeta[t - 1]:.10g}")
    return "\n".join(lines) + "\n"
