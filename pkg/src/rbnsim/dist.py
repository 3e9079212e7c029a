"""Degree distributions and the quantities derived from them.

Laws have finite explicit support.  ``Pmf`` is a law on nonnegative integer
degrees, ``JointPmf`` a law on (in-degree, out-degree) pairs.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Union

import numpy as np

from .errors import ConvergenceError, PreconditionError

MASS_TOL = 1e-12
MEAN_TOL = 1e-9
CRITICAL_BAND = 1e-12
FIXED_POINT_TOL = 1e-12
FIXED_POINT_CAP = 10**6


def _check_masses(masses: np.ndarray) -> None:
    if np.any(~np.isfinite(masses)) or np.any(masses < 0):
        raise PreconditionError("probability masses must be finite and >= 0")
    total = float(masses.sum())
    if abs(total - 1.0) > MASS_TOL:
        raise PreconditionError(f"probability masses sum to {total!r}, not 1")


@dataclass(frozen=True, eq=False)
class Pmf:
    """A probability mass function on nonnegative integers.

    >>> Pmf({2: 0.5, 4: 0.5}).mean
    3.0
    """

    entries: Mapping[int, float]
    ks: np.ndarray = field(init=False, repr=False)
    ps: np.ndarray = field(init=False, repr=False)
    cdf: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        items = sorted((int(k), float(p)) for k, p in dict(self.entries).items())
        if not items:
            raise PreconditionError("a pmf needs at least one entry")
        if items[0][0] < 0:
            raise PreconditionError("degrees must be nonnegative")
        ks = np.array([k for k, _ in items], dtype=np.int64)
        ps = np.array([p for _, p in items], dtype=np.float64)
        _check_masses(ps)
        cdf = np.cumsum(ps)
        cdf[-1] = 1.0
        object.__setattr__(self, "entries", dict(items))
        object.__setattr__(self, "ks", ks)
        object.__setattr__(self, "ps", ps)
        object.__setattr__(self, "cdf", cdf)

    @classmethod
    def delta(cls, k: int) -> "Pmf":
        return cls({k: 1.0})

    @classmethod
    def from_weights(cls, weights: Mapping[int, float]) -> "Pmf":
        """Normalize nonnegative weights into a pmf."""
        total = float(sum(weights.values()))
        if not total > 0:
            raise PreconditionError("weights must have positive total")
        return cls({k: w / total for k, w in weights.items()})

    @classmethod
    def power_law(cls, alpha: float, k_min: int, k_max: int) -> "Pmf":
        """Truncated power law, p_k proportional to k**-alpha on [k_min, k_max]."""
        if not 1 <= k_min <= k_max:
            raise PreconditionError("need 1 <= k_min <= k_max")
        return cls.from_weights({k: k ** (-float(alpha)) for k in range(k_min, k_max + 1)})

    @property
    def mean(self) -> float:
        return float(np.dot(self.ks, self.ps))

    @property
    def max_degree(self) -> int:
        return int(self.ks[self.ps > 0].max())

    def __eq__(self, other):
        if not isinstance(other, Pmf):
            return NotImplemented
        return self.entries == other.entries

    def __repr__(self) -> str:
        return f"Pmf({self.entries!r})"


@dataclass(frozen=True, eq=False)
class JointPmf:
    """A probability mass function on (in-degree, out-degree) pairs."""

    entries: Mapping[tuple[int, int], float]
    pairs: np.ndarray = field(init=False, repr=False)
    ps: np.ndarray = field(init=False, repr=False)
    cdf: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        items = sorted(((int(k), int(l)), float(p)) for (k, l), p in dict(self.entries).items())
        if not items:
            raise PreconditionError("a joint pmf needs at least one entry")
        pairs = np.array([kl for kl, _ in items], dtype=np.int64).reshape(-1, 2)
        if np.any(pairs < 0):
            raise PreconditionError("degrees must be nonnegative")
        ps = np.array([p for _, p in items], dtype=np.float64)
        _check_masses(ps)
        cdf = np.cumsum(ps)
        cdf[-1] = 1.0
        object.__setattr__(self, "entries", dict(items))
        object.__setattr__(self, "pairs", pairs)
        object.__setattr__(self, "ps", ps)
        object.__setattr__(self, "cdf", cdf)

    @classmethod
    def product(cls, in_pmf: Pmf, out_pmf: Pmf) -> "JointPmf":
        return cls({(k, l): pk * pl
                    for k, pk in in_pmf.entries.items()
                    for l, pl in out_pmf.entries.items()})

    @property
    def mean_in(self) -> float:
        return float(np.dot(self.pairs[:, 0], self.ps))

    @property
    def mean_out(self) -> float:
        return float(np.dot(self.pairs[:, 1], self.ps))

    @property
    def mean_io(self) -> float:
        """E[in-degree * out-degree]."""
        return float(np.dot(self.pairs[:, 0] * self.pairs[:, 1], self.ps))

    @property
    def equal_means(self) -> bool:
        return abs(self.mean_in - self.mean_out) <= MEAN_TOL

    def in_marginal(self) -> Pmf:
        return _marginal(self.pairs[:, 0], self.ps)

    def out_marginal(self) -> Pmf:
        return _marginal(self.pairs[:, 1], self.ps)

    def __eq__(self, other):
        if not isinstance(other, JointPmf):
            return NotImplemented
        return self.entries == other.entries

    def __repr__(self) -> str:
        return f"JointPmf({self.entries!r})"


def _marginal(ks: np.ndarray, ps: np.ndarray) -> Pmf:
    acc: dict[int, float] = {}
    for k, p in zip(ks.tolist(), ps.tolist()):
        acc[k] = acc.get(k, 0.0) + p
    total = sum(acc.values())
    return Pmf({k: p / total for k, p in acc.items()})


Law = Union[Pmf, JointPmf]


def moments(pmf: Pmf) -> tuple[float, float]:
    """Return (mean, second moment)."""
    return float(np.dot(pmf.ks, pmf.ps)), float(np.dot(pmf.ks * pmf.ks, pmf.ps))


def q_from_bias(p: float) -> float:
    """Change probability 2p(1-p) of a Boolean entry with expression bias p."""
    if not 0.0 <= p <= 1.0:
        raise PreconditionError(f"bias must lie in [0, 1], got {p!r}")
    return 2.0 * p * (1.0 - p)


def _offspring_map(mu: Pmf, q: float):
    ks, ps = mu.ks.astype(np.float64), mu.ps

    def phi(theta: float) -> float:
        return 1.0 - q + q * float(np.dot(ps, theta ** ks))

    def dphi(theta: float) -> float:
        pos = ks > 0
        return q * float(np.dot(ps[pos] * ks[pos], theta ** (ks[pos] - 1)))

    return phi, dphi


def extinction_probability(mu: Pmf, q: float) -> float:
    """Smallest fixed point in [0, 1] of theta = 1 - q + q * G_mu(theta)."""
    if not 0.0 <= q <= 1.0:
        raise PreconditionError(f"q must lie in [0, 1], got {q!r}")
    phi, dphi = _offspring_map(mu, q)
    if q == 1.0 and mu.entries.get(1, 0.0) == 1.0:
        # Offspring count is identically one: every theta is a fixed point.
        return 0.0
    if q * mu.mean <= 1.0:
        # Mean offspring <= 1 and not degenerate: the minimal root is 1.
        return 1.0
    theta = 0.0
    for _ in range(FIXED_POINT_CAP):
        nxt = phi(theta)
        if abs(nxt - theta) < FIXED_POINT_TOL:
            theta = nxt
            break
        theta = nxt
    # Newton from below on the convex decreasing f(theta) = phi(theta) - theta
    # approaches the minimal root monotonically; it removes the slack the
    # stopping rule leaves near criticality.
    for _ in range(50):
        slope = dphi(theta) - 1.0
        if slope >= 0:
            break
        step = (phi(theta) - theta) / slope
        if not abs(step) > 1e-17:
            break
        theta = min(max(theta - step, 0.0), 1.0)
    if abs(phi(theta) - theta) >= 1e-10:
        raise ConvergenceError(
            f"no fixed point within 1e-10 after {FIXED_POINT_CAP} iterations (theta={theta!r})")
    return theta


def survival_probability(mu: Pmf, q: float) -> float:
    """Survival probability of the branching process with offspring law (1-q)δ0 + qμ."""
    return 1.0 - extinction_probability(mu, q)


def size_biased_in_marginal(joint: JointPmf) -> Pmf:
    """In-degree law weighted by out-degree: p~_k = sum_l l p_{k,l} / r_in."""
    if not joint.equal_means:
        raise PreconditionError(
            f"marginal means differ: in {joint.mean_in!r}, out {joint.mean_out!r}")
    r_in = joint.mean_in
    if r_in <= 0:
        raise PreconditionError("size biasing needs a positive mean degree")
    acc: dict[int, float] = {}
    for (k, l), p in joint.entries.items():
        acc[k] = acc.get(k, 0.0) + l * p
    weights = {k: w / r_in for k, w in acc.items() if w > 0}
    total = sum(weights.values())
    # r_out == r_in only within MEAN_TOL; renormalize away the residue.
    return Pmf({k: w / total for k, w in weights.items()})


def gamma(eta: float, mu: Pmf) -> float:
    """Integral of the upper quantile function, ∫_0^eta mu^{<-}(1 - t) dt.

    Equivalently eta times the mean of the top eta-fraction of the law.
    """
    if not 0.0 < eta <= 1.0:
        raise PreconditionError(f"eta must lie in (0, 1], got {eta!r}")
    if eta == 1.0:
        return moments(mu)[0]
    # Descending support: value k_j owns the t-interval [c_j, c_j + p_j).
    desc = np.argsort(-mu.ks, kind="stable")
    ks, ps = mu.ks[desc], mu.ps[desc]
    starts = np.concatenate(([0.0], np.cumsum(ps)[:-1]))
    lengths = np.clip(eta - starts, 0.0, ps)
    return float(np.dot(ks, lengths))


def sample(law: Law, rng: np.random.Generator, size=None):
    """Inverse-CDF draws: degrees for a Pmf, (in, out) pairs for a JointPmf."""
    u = rng.random(size)
    idx = np.searchsorted(law.cdf, u, side="right")
    if isinstance(law, JointPmf):
        out = law.pairs[idx]
        return tuple(int(v) for v in out) if size is None else out
    out = law.ks[idx]
    return int(out) if size is None else out


class Regime(str, enum.Enum):
    ORDERED = "ordered"
    CRITICAL = "critical"
    CHAOTIC = "chaotic"


@dataclass(frozen=True)
class Criticality:
    parameter_product: float
    regime: Regime


def classify(q: float, r_eff: float) -> Criticality:
    """Place q * r_eff relative to the order-chaos boundary q * r_eff = 1."""
    if q < 0 or r_eff <= 0:
        raise PreconditionError("need q >= 0 and r_eff > 0")
    product = q * r_eff
    if product > 1.0 + CRITICAL_BAND:
        regime = Regime.CHAOTIC
    elif product < 1.0 - CRITICAL_BAND:
        regime = Regime.ORDERED
    else:
        regime = Regime.CRITICAL
    return Criticality(product, regime)


# -- plain-text serialization ----------------------------------------------

def _data_lines(text: str):
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if line:
            yield lineno, line.split()


def _renormalized(weights: dict, source: str):
    total = sum(weights.values())
    if abs(total - 1.0) > 1e-6:
        raise PreconditionError(f"{source}: masses sum to {total!r}")
    return {k: v / total for k, v in weights.items()}


def parse_pmf(text: str, source: str = "<pmf>") -> Pmf:
    """Parse ``k p_k`` lines.  Masses within 1e-6 of unit total are renormalized."""
    weights: dict[int, float] = {}
    for lineno, cols in _data_lines(text):
        if len(cols) != 2:
            raise PreconditionError(f"{source}:{lineno}: expected 'k p_k'")
        k = int(cols[0])
        weights[k] = weights.get(k, 0.0) + float(cols[1])
    return Pmf(_renormalized(weights, source))


def parse_joint(text: str, source: str = "<joint>") -> JointPmf:
    """Parse ``k l p_kl`` lines."""
    weights: dict[tuple[int, int], float] = {}
    for lineno, cols in _data_lines(text):
        if len(cols) != 3:
            raise PreconditionError(f"{source}:{lineno}: expected 'k l p_kl'")
        kl = (int(cols[0]), int(cols[1]))
        weights[kl] = weights.get(kl, 0.0) + float(cols[2])
    return JointPmf(_renormalized(weights, source))


def format_pmf(pmf: Pmf) -> str:
    return "".join(f"{k} {p!r}\n" for k, p in pmf.entries.items())


def format_joint(joint: JointPmf) -> str:
    return "".join(f"{k} {l} {p!r}\n" for (k, l), p in joint.entries.items())


def load_pmf(path) -> Pmf:
    path = Path(path)
    return parse_pmf(path.read_text(), str(path))


def load_joint(path) -> JointPmf:
    path = Path(path)
    return parse_joint(path.read_text(), str(path))


__all__ = [
    "Pmf", "JointPmf", "Law", "Regime", "Criticality",
    "moments", "q_from_bias", "survival_probability", "extinction_probability",
    "size_biased_in_marginal", "gamma", "sample", "classify",
    "parse_pmf", "parse_joint", "format_pmf", "format_joint", "load_pmf", "load_joint",
]
