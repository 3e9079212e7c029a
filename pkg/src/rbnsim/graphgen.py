"""Random directed graphs with prescribed in-, out-, or joint degree laws.

Node ids are ``0 .. n-1``.  A ``DirectedGraph`` stores both adjacency
directions in CSR form: ``inputs(x)`` are the nodes with an edge into ``x``
and ``outputs(z)`` the nodes ``z`` points to.  Generators store each input
list in ascending order so that a graph written as an edge list and read back
is identical, input order included.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dist import JointPmf, Pmf, sample
from .errors import GenerationError, PreconditionError

DEFAULT_MAX_RETRIES = 10**6


def _ptr_from_counts(counts: np.ndarray) -> np.ndarray:
    ptr = np.zeros(len(counts) + 1, dtype=np.int64)
    np.cumsum(counts, out=ptr[1:])
    return ptr


class DirectedGraph:
    """Immutable directed (multi)graph with consistent input and output lists."""

    __slots__ = ("n", "in_ptr", "in_idx", "out_ptr", "out_idx")

    def __init__(self, n, in_ptr, in_idx, out_ptr=None, out_idx=None):
        self.n = int(n)
        self.in_ptr = np.asarray(in_ptr, dtype=np.int64)
        self.in_idx = np.asarray(in_idx, dtype=np.int64)
        if out_ptr is None:
            dst = np.repeat(np.arange(self.n, dtype=np.int64), np.diff(self.in_ptr))
            order = np.argsort(self.in_idx, kind="stable")
            out_ptr = _ptr_from_counts(np.bincount(self.in_idx, minlength=self.n))
            out_idx = dst[order]
        self.out_ptr = np.asarray(out_ptr, dtype=np.int64)
        self.out_idx = np.asarray(out_idx, dtype=np.int64)
        for arr in (self.in_ptr, self.in_idx, self.out_ptr, self.out_idx):
            arr.flags.writeable = False

    @classmethod
    def from_edges(cls, n: int, src, dst) -> "DirectedGraph":
        """Build from parallel ``src -> dst`` arrays; input lists sorted ascending."""
        src = np.asarray(src, dtype=np.int64)
        dst = np.asarray(dst, dtype=np.int64)
        if src.shape != dst.shape:
            raise PreconditionError("src and dst must have equal length")
        if src.size and (min(src.min(), dst.min()) < 0 or max(src.max(), dst.max()) >= n):
            raise PreconditionError("edge endpoint out of range")
        order = np.lexsort((src, dst))
        return cls(n, _ptr_from_counts(np.bincount(dst, minlength=n)), src[order])

    def inputs(self, x: int) -> np.ndarray:
        return self.in_idx[self.in_ptr[x]:self.in_ptr[x + 1]]

    def outputs(self, z: int) -> np.ndarray:
        return self.out_idx[self.out_ptr[z]:self.out_ptr[z + 1]]

    @property
    def in_degrees(self) -> np.ndarray:
        return np.diff(self.in_ptr)

    @property
    def out_degrees(self) -> np.ndarray:
        return np.diff(self.out_ptr)

    @property
    def num_edges(self) -> int:
        return int(self.in_idx.size)

    def edges(self) -> tuple[np.ndarray, np.ndarray]:
        """All edges as ``(src, dst)`` arrays sorted by src, then dst."""
        src = np.repeat(np.arange(self.n, dtype=np.int64), self.out_degrees)
        dst = self.out_idx
        order = np.lexsort((dst, src))
        return src[order], dst[order]

    def edge_list(self) -> list[tuple[int, int]]:
        src, dst = self.edges()
        return list(zip(src.tolist(), dst.tolist()))

    def is_consistent(self) -> bool:
        """Full scan: the output lists are exactly the transposed input lists."""
        if self.in_ptr[-1] != self.out_ptr[-1]:
            return False
        dst_in = np.repeat(np.arange(self.n), self.in_degrees)
        src_out = np.repeat(np.arange(self.n), self.out_degrees)
        a = np.sort(self.in_idx * self.n + dst_in)
        b = np.sort(src_out * self.n + self.out_idx)
        return bool(np.array_equal(a, b))

    def has_self_loops(self) -> bool:
        return bool(np.any(self.in_idx == np.repeat(np.arange(self.n), self.in_degrees)))

    def has_multi_edges(self) -> bool:
        keys = np.sort(np.repeat(np.arange(self.n), self.in_degrees) * self.n + self.in_idx)
        return bool(np.any(keys[1:] == keys[:-1]))

    def __eq__(self, other):
        if not isinstance(other, DirectedGraph):
            return NotImplemented
        return (self.n == other.n
                and np.array_equal(self.in_ptr, other.in_ptr)
                and np.array_equal(self.in_idx, other.in_idx)
                and np.array_equal(self.out_ptr, other.out_ptr)
                and np.array_equal(self.out_idx, other.out_idx))

    __hash__ = None

    def __repr__(self) -> str:
        return f"DirectedGraph(n={self.n}, edges={self.num_edges})"


def reverse(g: DirectedGraph) -> DirectedGraph:
    """Edge reversal; swaps the two CSR halves, so it is an exact involution."""
    return DirectedGraph(g.n, g.out_ptr, g.out_idx, g.in_ptr, g.in_idx)


def gather(ptr: np.ndarray, idx: np.ndarray, nodes: np.ndarray) -> np.ndarray:
    """Concatenate the CSR rows ``idx[ptr[v]:ptr[v+1]]`` for every v in ``nodes``."""
    nodes = np.asarray(nodes, dtype=np.int64)
    starts = ptr[nodes]
    lens = ptr[nodes + 1] - starts
    total = int(lens.sum())
    if total == 0:
        return np.empty(0, dtype=np.int64)
    offsets = np.repeat(starts - np.concatenate(([0], np.cumsum(lens)[:-1])), lens)
    return idx[offsets + np.arange(total)]


# -- RBN1 / RBN2: prescribed in-degree -------------------------------------

def _distinct_rows(n: int, rows: np.ndarray, degs: np.ndarray, rng) -> list[np.ndarray]:
    """Uniform ``degs[i]``-subsets of ``[n] minus {rows[i]}`` by whole-row rejection."""
    out: list = [None] * len(rows)
    pending = np.arange(len(rows))
    while pending.size:
        d = degs[pending]
        owner = np.repeat(pending, d)
        node = rows[owner]
        cand = rng.integers(0, n - 1, size=owner.size)
        cand += cand >= node
        order = np.lexsort((cand, owner))
        so, sc = owner[order], cand[order]
        dup = (so[1:] == so[:-1]) & (sc[1:] == sc[:-1])
        bad = np.zeros(len(rows), dtype=bool)
        bad[so[1:][dup]] = True
        ptr = _ptr_from_counts(d)
        for j, i in enumerate(pending.tolist()):
            if not bad[i]:
                out[i] = sc[ptr[j]:ptr[j + 1]]
        pending = pending[bad[pending]]
    return out


def sample_input_sets(n: int, in_degrees: np.ndarray, rng: np.random.Generator) -> DirectedGraph:
    """Graph whose node x has a uniform random ``in_degrees[x]``-subset of the other nodes as inputs."""
    in_degrees = np.asarray(in_degrees, dtype=np.int64)
    if in_degrees.size != n:
        raise PreconditionError("need one in-degree per node")
    if np.any(in_degrees > n - 1) or np.any(in_degrees < 0):
        raise PreconditionError(f"every in-degree must lie in [0, n-1] = [0, {n - 1}]")
    rows: list = [None] * n
    small = np.flatnonzero((in_degrees > 0) & (in_degrees <= math.isqrt(n)))
    if small.size:
        for x, chosen in zip(small.tolist(), _distinct_rows(n, small, in_degrees[small], rng)):
            rows[x] = chosen
    for x in np.flatnonzero(in_degrees > math.isqrt(n)).tolist():
        chosen = rng.choice(n - 1, size=int(in_degrees[x]), replace=False)
        rows[x] = chosen + (chosen >= x)
    empty = np.empty(0, dtype=np.int64)
    in_idx = np.concatenate([np.sort(r) if r is not None else empty for r in rows]) if n else empty
    return DirectedGraph(n, _ptr_from_counts(in_degrees), in_idx)


def generate_rbn2(n: int, in_pmf: Pmf, rng: np.random.Generator) -> DirectedGraph:
    """i.i.d. in-degrees from ``in_pmf``; each input set uniform among the other nodes."""
    if n < 1:
        raise PreconditionError("need n >= 1")
    degs = sample(in_pmf, rng, n)
    if np.any(degs > n - 1):
        raise PreconditionError(f"sampled in-degree {int(degs.max())} exceeds n-1 = {n - 1}")
    return sample_input_sets(n, degs, rng)


def generate_rbn1(n: int, r: int, rng: np.random.Generator) -> DirectedGraph:
    """Every node gets exactly ``r`` distinct inputs."""
    return generate_rbn2(n, Pmf.delta(r), rng)


# -- RBN3 / RBN4: configuration model --------------------------------------

@dataclass(frozen=True)
class ConfigBuild:
    """A configuration-model graph and how much rejection it took."""

    graph: DirectedGraph
    in_degrees: np.ndarray
    out_degrees: np.ndarray
    degree_draws: int
    matching_draws: int
    mode: str

    @property
    def matching_acceptance(self) -> float:
        return 1.0 / self.matching_draws


def _is_simple(n: int, src: np.ndarray, dst: np.ndarray) -> bool:
    if np.any(src == dst):
        return False
    keys = np.sort(dst * n + src)
    return not np.any(keys[1:] == keys[:-1])


def generate_rbn4(n: int, joint: JointPmf, rng: np.random.Generator,
                  simple_mode: bool = True, max_retries: int = DEFAULT_MAX_RETRIES,
                  erase: bool = False) -> ConfigBuild:
    """Directed configuration model with i.i.d. degree pairs from ``joint``.

    Degree draws are repeated wholesale until the in- and out-degree totals
    agree.  Arrows are then matched by a uniform permutation; with
    ``simple_mode`` the matching alone is redrawn until there are no
    self-loops and no repeated edges.

    ``erase=True`` instead keeps the first matching and deletes self-loops and
    duplicate edges.  The result no longer follows the conditioned law and the
    realized degrees can fall below the drawn ones.
    """
    if n < 1:
        raise PreconditionError("need n >= 1")
    if not joint.equal_means:
        raise PreconditionError(
            f"joint law needs equal marginal means, got {joint.mean_in!r} vs {joint.mean_out!r}")
    if simple_mode and erase:
        raise PreconditionError("simple_mode and erase are mutually exclusive")

    degree_draws = 0
    while True:
        degree_draws += 1
        pairs = sample(joint, rng, n)
        if pairs[:, 0].sum() == pairs[:, 1].sum():
            break
        if degree_draws >= max_retries:
            raise GenerationError(
                f"degree totals never balanced in {degree_draws} draws",
                degree_retries=degree_draws)
    in_deg, out_deg = pairs[:, 0].copy(), pairs[:, 1].copy()
    nodes = np.arange(n, dtype=np.int64)
    dst = np.repeat(nodes, in_deg)
    out_stubs = np.repeat(nodes, out_deg)

    matching_draws = 0
    while True:
        matching_draws += 1
        src = rng.permutation(out_stubs)
        if not simple_mode or _is_simple(n, src, dst):
            break
        if matching_draws >= max_retries:
            raise GenerationError(
                f"no simple matching in {matching_draws} draws",
                degree_retries=degree_draws, matching_retries=matching_draws)

    mode = "simple" if simple_mode else ("erased" if erase else "multigraph")
    if erase:
        keep = src != dst
        keys = np.unique(dst[keep] * n + src[keep])
        g = DirectedGraph.from_edges(n, keys % n, keys // n)
    else:
        g = DirectedGraph.from_edges(n, src, dst)
    return ConfigBuild(g, in_deg, out_deg, degree_draws, matching_draws, mode)


def generate_rbn3(n: int, out_pmf: Pmf, in_pmf: Pmf, rng: np.random.Generator,
                  simple_mode: bool = True, max_retries: int = DEFAULT_MAX_RETRIES,
                  erase: bool = False) -> ConfigBuild:
    """Prescribed out-degree law, realized through the product joint ``in_pmf x out_pmf``."""
    if abs(out_pmf.mean - in_pmf.mean) > 1e-9:
        raise PreconditionError(
            f"in and out laws need equal means, got {in_pmf.mean!r} vs {out_pmf.mean!r}")
    return generate_rbn4(n, JointPmf.product(in_pmf, out_pmf), rng,
                         simple_mode=simple_mode, max_retries=max_retries, erase=erase)


def random_digraph(n: int, edge_prob: float, rng: np.random.Generator) -> DirectedGraph:
    """Each ordered pair ``z != x`` is an edge independently; small test instances."""
    mask = rng.random((n, n)) < edge_prob
    np.fill_diagonal(mask, False)
    src, dst = np.nonzero(mask)
    return DirectedGraph.from_edges(n, src, dst)


# -- exploration -----------------------------------------------------------

def out_cluster(g: DirectedGraph, x: int, depth: int) -> set[int]:
    """Nodes reachable from ``x`` along directed paths of length <= ``depth``."""
    if not 0 <= x < g.n:
        raise PreconditionError(f"node {x} out of range")
    if depth < 0:
        raise PreconditionError("depth must be >= 0")
    seen = np.zeros(g.n, dtype=bool)
    seen[x] = True
    frontier = np.array([x], dtype=np.int64)
    for _ in range(depth):
        nxt = np.unique(gather(g.out_ptr, g.out_idx, frontier))
        nxt = nxt[~seen[nxt]]
        if nxt.size == 0:
            break
        seen[nxt] = True
        frontier = nxt
    return set(np.flatnonzero(seen).tolist())


# -- edge-list files -------------------------------------------------------

def format_edge_list(g: DirectedGraph) -> str:
    lines = [f"n={g.n}"]
    lines.extend(f"{s} {d}" for s, d in g.edge_list())
    return "\n".join(lines) + "\n"


def parse_edge_list(text: str, source: str = "<edges>") -> DirectedGraph:
    lines = [ln.split("#", 1)[0].strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln]
    if not lines or not lines[0].startswith("n="):
        raise PreconditionError(f"{source}: first line must be 'n=<count>'")
    n = int(lines[0][2:])
    src, dst = [], []
    for lineno, ln in enumerate(lines[1:], 2):
        cols = ln.split()
        if len(cols) != 2:
            raise PreconditionError(f"{source}:{lineno}: expected 'src dst'")
        src.append(int(cols[0]))
        dst.append(int(cols[1]))
    return DirectedGraph.from_edges(n, src, dst)


def write_edge_list(g: DirectedGraph, path) -> None:
    Path(path).write_text(format_edge_list(g))


def read_edge_list(path) -> DirectedGraph:
    path = Path(path)
    return parse_edge_list(path.read_text(), str(path))


def graph_digest(g: DirectedGraph) -> str:
    """SHA-256 of the canonical edge-list text."""
    return hashlib.sha256(format_edge_list(g).encode()).hexdigest()
