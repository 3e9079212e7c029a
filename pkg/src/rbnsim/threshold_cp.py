"""Threshold contact process and its dual coalescing branching process.

Occupied sets are boolean masks of length ``n``.  The coin of node ``x`` for
the transition from time ``t`` to ``t+1`` is ``coins.uniform(t, x)``; because
the coin depends only on its key, runs from different initial sets sharing a
``CoinStream`` are coupled monotonically.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np

from .errors import PreconditionError
from .graphgen import DirectedGraph, gather
from .keyed import CoinStream


def as_mask(n: int, members) -> np.ndarray:
    """Boolean mask from a mask, or from an iterable of node ids."""
    arr = np.asarray(members) if not isinstance(members, (set, frozenset)) else None
    if arr is not None and arr.dtype == bool:
        if arr.shape != (n,):
            raise PreconditionError(f"mask has shape {arr.shape}, expected ({n},)")
        return arr.copy()
    mask = np.zeros(n, dtype=bool)
    ids = np.fromiter((int(v) for v in members), dtype=np.int64)
    if ids.size and (ids.min() < 0 or ids.max() >= n):
        raise PreconditionError("node id out of range")
    mask[ids] = True
    return mask


def members(mask: np.ndarray) -> set[int]:
    return set(np.flatnonzero(mask).tolist())


def eligible(g: DirectedGraph, xi: np.ndarray) -> np.ndarray:
    """Mask of nodes with at least one occupied input, pushed along output lists."""
    out = np.zeros(g.n, dtype=bool)
    occupied = np.flatnonzero(xi)
    if occupied.size:
        out[gather(g.out_ptr, g.out_idx, occupied)] = True
    return out


def _check_q(q: float) -> None:
    if not 0.0 <= q <= 1.0:
        raise PreconditionError(f"q must lie in [0, 1], got {q!r}")


def tcp_step(g: DirectedGraph, q: float, xi: np.ndarray, coins: CoinStream, t: int = 0) -> np.ndarray:
    """One step of the threshold contact process from the occupied mask ``xi`` at time ``t``."""
    _check_q(q)
    cand = np.flatnonzero(eligible(g, xi))
    nxt = np.zeros(g.n, dtype=bool)
    nxt[cand[coins.flips(t, cand, q)]] = True
    return nxt


def dual_step(g_rev: DirectedGraph, q: float, xi: np.ndarray, coins: CoinStream, t: int = 0) -> np.ndarray:
    """One step of the dual on the reversed graph: each occupied site births all its children w.p. q."""
    _check_q(q)
    occupied = np.flatnonzero(xi)
    parents = occupied[coins.flips(t, occupied, q)]
    nxt = np.zeros(g_rev.n, dtype=bool)
    if parents.size:
        nxt[gather(g_rev.out_ptr, g_rev.out_idx, parents)] = True
    return nxt


@dataclass
class ProcessTrace:
    """Occupied counts for t = 0, 1, ... until extinction or the horizon.

    ``counts`` stops at the extinction time; ``densities(pad=True)`` extends
    it with zeros through ``horizon``.
    """

    n: int
    horizon: int
    counts: np.ndarray
    extinction_time: Optional[int]
    meta: dict = field(default_factory=dict)

    @property
    def censored(self) -> bool:
        return self.extinction_time is None

    def survived_to(self, t: int) -> bool:
        return self.extinction_time is None or self.extinction_time > t

    def densities(self, pad: bool = False) -> np.ndarray:
        d = self.counts / self.n
        if pad and d.size < self.horizon + 1:
            d = np.concatenate((d, np.zeros(self.horizon + 1 - d.size)))
        return d

    def to_csv(self) -> str:
        lines = ["t,occupied_count,density"]
        for t, c in enumerate(self.counts.tolist()):
            lines.append(f"{t},{c},{c / self.n:.10g}")
        return "\n".join(lines) + "\n"

    def metadata_json(self) -> str:
        meta = dict(self.meta)
        meta.update(n=self.n, horizon=self.horizon, extinction_time=self.extinction_time)
        return json.dumps(meta, sort_keys=True)


def _run(step, g, q, start, t_max, coins) -> ProcessTrace:
    if t_max < 1:
        raise PreconditionError("t_max must be >= 1")
    xi = as_mask(g.n, start)
    counts = [int(xi.sum())]
    extinction = 0 if counts[0] == 0 else None
    t = 0
    while extinction is None and t < t_max:
        xi = step(g, q, xi, coins, t)
        t += 1
        counts.append(int(xi.sum()))
        if counts[-1] == 0:
            extinction = t
    return ProcessTrace(g.n, t_max, np.array(counts, dtype=np.int64), extinction)


def run_tcp(g: DirectedGraph, q: float, start, t_max: int, coins: CoinStream) -> ProcessTrace:
    return _run(tcp_step, g, q, start, t_max, coins)


def run_from_full(g: DirectedGraph, q: float, t_max: int, coins: CoinStream) -> ProcessTrace:
    """Threshold CP from all sites occupied; stops early on extinction."""
    return run_tcp(g, q, np.ones(g.n, dtype=bool), t_max, coins)


def run_dual(g_rev: DirectedGraph, q: float, x0, t_max: int, coins: CoinStream) -> ProcessTrace:
    """Dual process on ``g_rev`` from ``{x0}`` (or from a set/mask of nodes)."""
    start = [x0] if isinstance(x0, (int, np.integer)) else x0
    return _run(dual_step, g_rev, q, start, t_max, coins)


def coupled_runs(g: DirectedGraph, q: float, starts: Iterable, t_max: int, coins: CoinStream):
    """Masks ξ_0..ξ_t_max for several initial sets on one shared coin stream."""
    paths = []
    for start in starts:
        xi = as_mask(g.n, start)
        path = [xi]
        for t in range(t_max):
            xi = tcp_step(g, q, xi, coins, t)
            path.append(xi)
        paths.append(path)
    return paths
