"""Exact laws of the threshold CP and its dual on tiny graphs.

A state is a subset of the nodes, encoded as a bitmask (bit ``i`` set when
node ``i`` is occupied); a distribution is a dense vector over all ``2**n``
masks.  Both dynamics factor into two exact linear maps:

* a deterministic push ``S -> N(S)``, where ``N(S)`` is the union of the
  output lists of the members of ``S``, and
* independent per-node thinning, keeping each occupied node with probability
  ``q``, applied one bit at a time.

The forward process pushes then thins (the eligible set receives coins); the
dual thins then pushes (occupied sites flip birth coins, then births spread
to children).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence, Union

import numpy as np

from .errors import OracleCapError, PreconditionError
from .graphgen import DirectedGraph, random_digraph, reverse

DEFAULT_CAP = 14
FORWARD = "forward"
DUAL = "dual"


def to_bitmask(nodes: Iterable[int]) -> int:
    m = 0
    for v in nodes:
        m |= 1 << int(v)
    return m


def from_bitmask(mask: int) -> set[int]:
    return {i for i in range(int(mask).bit_length()) if mask >> i & 1}


@dataclass
class StateDistribution:
    n: int
    masses: np.ndarray

    @classmethod
    def point(cls, n: int, state: Union[int, Iterable[int]], cap: int = DEFAULT_CAP) -> "StateDistribution":
        _check_cap(n, cap)
        mask = state if isinstance(state, (int, np.integer)) else to_bitmask(state)
        if not 0 <= mask < 1 << n:
            raise PreconditionError("state outside the node range")
        masses = np.zeros(1 << n)
        masses[mask] = 1.0
        return cls(n, masses)

    def total(self) -> float:
        return float(self.masses.sum())

    def as_dict(self, tol: float = 0.0) -> dict[frozenset, float]:
        idx = np.flatnonzero(self.masses > tol)
        return {frozenset(from_bitmask(int(i))): float(self.masses[i]) for i in idx}


def _check_cap(n: int, cap: int) -> None:
    if n > cap:
        raise OracleCapError(f"exact enumeration capped at n <= {cap}, got n = {n}")


def neighborhood_table(g: DirectedGraph) -> np.ndarray:
    """``table[S]`` = bitmask of the union of output lists of the members of ``S``."""
    nbr = np.zeros(g.n, dtype=np.int64)
    for v in range(g.n):
        for z in g.outputs(v).tolist():
            nbr[v] |= 1 << z
    table = np.zeros(1 << g.n, dtype=np.int64)
    for i in range(g.n):
        half = 1 << i
        table[half:2 * half] = table[:half] | nbr[i]
    return table


def _push(masses: np.ndarray, table: np.ndarray) -> np.ndarray:
    return np.bincount(table, weights=masses, minlength=masses.size)


def _thin(masses: np.ndarray, n: int, q: float) -> np.ndarray:
    out = masses.copy()
    for i in range(n):
        view = out.reshape(-1, 2, 1 << i)
        view[:, 0, :] += (1.0 - q) * view[:, 1, :]
        view[:, 1, :] *= q
    return out


def exact_evolve(g: DirectedGraph, q: float, dist: StateDistribution, kind: str = FORWARD,
                 cap: int = DEFAULT_CAP, table: np.ndarray = None) -> StateDistribution:
    """One exact step.  For ``kind='dual'`` pass the graph the dual runs on (the reversed graph)."""
    _check_cap(g.n, cap)
    if dist.n != g.n:
        raise PreconditionError("distribution and graph sizes differ")
    if not 0.0 <= q <= 1.0:
        raise PreconditionError(f"q must lie in [0, 1], got {q!r}")
    if table is None:
        table = neighborhood_table(g)
    if kind == FORWARD:
        masses = _thin(_push(dist.masses, table), g.n, q)
    elif kind == DUAL:
        masses = _push(_thin(dist.masses, g.n, q), table)
    else:
        raise PreconditionError(f"unknown kind {kind!r}")
    return StateDistribution(g.n, masses)


def evolve(g: DirectedGraph, q: float, start, t: int, kind: str = FORWARD,
           cap: int = DEFAULT_CAP) -> StateDistribution:
    dist = StateDistribution.point(g.n, start, cap)
    table = neighborhood_table(g)
    for _ in range(t):
        dist = exact_evolve(g, q, dist, kind, cap, table)
    return dist


def hit_probability(g: DirectedGraph, q: float, start, target, t: int,
                    kind: str = FORWARD, cap: int = DEFAULT_CAP) -> float:
    """P(state at time t meets ``target``) from the point mass at ``start``."""
    if t < 0:
        raise PreconditionError("t must be >= 0")
    dist = evolve(g, q, start, t, kind, cap)
    tmask = target if isinstance(target, (int, np.integer)) else to_bitmask(target)
    states = np.arange(1 << g.n, dtype=np.int64)
    return float(dist.masses[(states & tmask) != 0].sum())


class DualityCheck(NamedTuple):
    lhs: float
    rhs: float
    abs_diff: float


def verify_duality(g: DirectedGraph, q: float, A, B, t: int, cap: int = DEFAULT_CAP) -> DualityCheck:
    """Forward hit of B from A on ``g`` against dual hit of A from B on the reversed graph."""
    lhs = hit_probability(g, q, A, B, t, FORWARD, cap)
    rhs = hit_probability(reverse(g), q, B, A, t, DUAL, cap)
    return DualityCheck(lhs, rhs, abs(lhs - rhs))


class DualityRow(NamedTuple):
    instance: int
    n: int
    q: float
    t: int
    lhs: float
    rhs: float
    diff: float


def duality_suite(sizes: Union[int, Sequence[int]], instances: int, rng: np.random.Generator,
                  qs: Sequence[float] = (0.2, 0.35, 0.5), t_max: int = 5,
                  cap: int = DEFAULT_CAP) -> list[DualityRow]:
    """Randomized instances: graph density, q, A, B and t drawn per instance."""
    sizes = [sizes] if isinstance(sizes, (int, np.integer)) else list(sizes)
    rows = []
    for i in range(instances):
        n = int(rng.choice(sizes))
        g = random_digraph(n, float(rng.uniform(0.1, 0.6)), rng)
        q = float(rng.choice(qs))
        t = int(rng.integers(0, t_max + 1))
        A = int(rng.integers(0, 1 << n))
        B = int(rng.integers(0, 1 << n))
        chk = verify_duality(g, q, A, B, t, cap)
        rows.append(DualityRow(i, n, q, t, chk.lhs, chk.rhs, chk.abs_diff))
    return rows
