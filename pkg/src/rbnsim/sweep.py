"""Experiment grids over (n, q, replica) and the estimators built on them."""

from __future__ import annotations

import configparser
import csv
import io
import json
import logging
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from . import dist
from .boolean_net import BooleanFunctionOracle, change_process
from .dist import JointPmf, Pmf, Regime
from .errors import GenerationError, PreconditionError
from .graphgen import DirectedGraph, generate_rbn2, generate_rbn3, generate_rbn4, reverse
from .keyed import CoinStream, TAG_DUAL, TAG_FORWARD, derive_seed
from .threshold_cp import ProcessTrace, run_dual, run_from_full

log = logging.getLogger(__name__)

MODELS = ("rbn1", "rbn2", "rbn3", "rbn4")
DYNAMICS = ("tcp", "dual", "boolean")
BATCHES = 10


def persistence_horizon(n: int) -> int:
    """Chaos proxy: survive to 100 log n."""
    return math.ceil(100 * math.log(n))


def extinction_horizon(n: int) -> int:
    """Order proxy: extinct by 40 log n."""
    return math.ceil(40 * math.log(n))


def crossing_horizon(n: int) -> int:
    """Survival horizon used to locate the critical q: 50 log n."""
    return math.ceil(50 * math.log(n))


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment: a model, a dynamics, a law and a grid over n and q.

    Give exactly one of ``q_values`` and ``p_values``; biases are turned into
    q = 2p(1-p).  Boolean dynamics need biases.  ``burn_in=None`` means
    0.4 * t_max.  For ``rbn3``, ``law`` is the out-degree law and ``in_law``
    the in-degree law (defaulting to ``law``).
    """

    model: str
    dynamics: str
    law: Union[Pmf, JointPmf]
    n_list: Sequence[int]
    t_max: int
    replicas: int = 1
    q_values: Sequence[float] = ()
    p_values: Sequence[float] = ()
    burn_in: Optional[int] = None
    master_seed: int = 0
    simple_mode: bool = True
    quenched: bool = False
    in_law: Optional[Pmf] = None
    name: str = "experiment"

    def __post_init__(self):
        if self.model not in MODELS:
            raise PreconditionError(f"model must be one of {MODELS}")
        if self.dynamics not in DYNAMICS:
            raise PreconditionError(f"dynamics must be one of {DYNAMICS}")
        if bool(self.q_values) == bool(self.p_values):
            raise PreconditionError("give exactly one of q_values and p_values")
        if self.dynamics == "boolean" and not self.p_values:
            raise PreconditionError("boolean dynamics need expression biases (p_values)")
        if self.model == "rbn4" and not isinstance(self.law, JointPmf):
            raise PreconditionError("rbn4 needs a joint law")
        if self.model != "rbn4" and not isinstance(self.law, Pmf):
            raise PreconditionError(f"{self.model} needs a single-degree law")
        if self.replicas < 1:
            raise PreconditionError("replicas must be >= 1")
        if self.t_max <= self.effective_burn_in:
            raise PreconditionError("t_max must exceed burn_in")

    @property
    def effective_burn_in(self) -> int:
        return int(0.4 * self.t_max) if self.burn_in is None else int(self.burn_in)

    def grid(self) -> list[tuple[float, Optional[float]]]:
        """(q, p) pairs; p is None when q was given directly."""
        if self.p_values:
            return [(dist.q_from_bias(p), float(p)) for p in self.p_values]
        return [(float(q), None) for q in self.q_values]

    def joint(self) -> JointPmf:
        if self.model == "rbn4":
            return self.law
        if self.model == "rbn3":
            return JointPmf.product(self.in_law or self.law, self.law)
        raise PreconditionError("only rbn3/rbn4 have joint laws")

    def r_eff(self) -> float:
        if self.model in ("rbn1", "rbn2"):
            return self.law.mean
        if self.model == "rbn3":
            return self.law.mean
        return self.law.mean_io / self.law.mean_in

    def offspring_law(self) -> Pmf:
        """The law whose branching survival probability predicts the density."""
        if self.model in ("rbn1", "rbn2"):
            return self.law
        return dist.size_biased_in_marginal(self.joint())


def regime_warnings(cfg: ExperimentConfig) -> list[str]:
    """Ways the configuration leaves the regime where the persistence and density results are proven."""
    out = []
    if cfg.model in ("rbn1", "rbn2"):
        low = cfg.law.entries.get(0, 0.0) + cfg.law.entries.get(1, 0.0)
        if low > 0:
            out.append("in-degree law puts mass on degrees 0 or 1")
    else:
        joint = cfg.joint()
        if any(k <= 1 and p > 0 for (k, _), p in joint.entries.items()):
            out.append("joint law puts mass on in-degrees <= 1")
        if not joint.equal_means:
            out.append("marginal means differ")
    for q, _ in cfg.grid():
        if not 0 < q < 0.5:
            out.append(f"q = {q!r} outside (0, 1/2)")
    return out


@dataclass(frozen=True)
class SweepRow:
    n: int
    q: float
    p: Optional[float]
    r_eff: float
    replica: int
    extinction_time: Optional[int]
    mean_density: Optional[float]
    density_stderr: Optional[float]
    predicted_pi: float
    regime: str
    status: str = "ok"
    final_density: Optional[float] = None

    @property
    def censored(self) -> bool:
        return self.status == "ok" and self.extinction_time is None


@dataclass
class SweepResult:
    config: ExperimentConfig
    rows: list[SweepRow]
    warnings: list[str] = field(default_factory=list)

    def cell(self, n: int, q: float) -> list[SweepRow]:
        return [r for r in self.rows if r.n == n and r.q == q]

    def survival_fraction(self, n: int, q: float, t: int) -> float:
        rows = [r for r in self.cell(n, q) if r.status == "ok"]
        alive = [r for r in rows if r.extinction_time is None or r.extinction_time > t]
        return len(alive) / len(rows) if rows else float("nan")

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["experiment", "n", "q", "p", "r_eff", "replica", "extinction_time", "censored",
                    "mean_density", "density_stderr", "final_density", "predicted_pi", "regime", "status"])
        for r in self.rows:
            w.writerow([self.config.name, r.n, _fmt(r.q), _fmt(r.p), _fmt(r.r_eff), r.replica,
                        "" if r.extinction_time is None else r.extinction_time,
                        int(r.censored), _fmt(r.mean_density), _fmt(r.density_stderr),
                        _fmt(r.final_density), _fmt(r.predicted_pi), r.regime, r.status])
        return buf.getvalue()

    def summary(self) -> list[dict]:
        """One record per (n, q) cell."""
        cells = []
        for key in sorted({(r.n, r.q) for r in self.rows}):
            rows = self.cell(*key)
            ok = [r for r in rows if r.status == "ok"]
            dens = [r.mean_density for r in ok if r.mean_density is not None]
            cells.append({
                "experiment": self.config.name,
                "n": key[0],
                "q": key[1],
                "replicas": len(rows),
                "failed": len(rows) - len(ok),
                "censored": sum(r.censored for r in ok),
                "censored_fraction": (sum(r.censored for r in ok) / len(ok)) if ok else None,
                "mean_density": float(np.mean(dens)) if dens else None,
                "predicted_pi": rows[0].predicted_pi,
                "regime": rows[0].regime,
            })
        return cells

    def summary_json(self) -> str:
        return json.dumps({"cells": self.summary(), "warnings": self.warnings}, indent=2, sort_keys=True)


def _fmt(x) -> str:
    return "" if x is None else f"{x:.10g}"


# -- estimators ------------------------------------------------------------

@dataclass(frozen=True)
class DensityEstimate:
    mean: float
    stderr: float


def estimate_density(trace: ProcessTrace, burn_in: int) -> Optional[DensityEstimate]:
    """Post-burn-in time average with a batch-means standard error.

    Returns ``None`` when the trace died out at or before ``burn_in``.
    """
    if not trace.survived_to(burn_in):
        return None
    window = trace.densities(pad=True)[burn_in + 1:trace.horizon + 1]
    if window.size == 0:
        raise PreconditionError("burn_in leaves no samples before the horizon")
    batches = np.array_split(window, min(BATCHES, window.size))
    means = np.array([b.mean() for b in batches])
    stderr = float(means.std(ddof=1) / math.sqrt(means.size)) if means.size > 1 else 0.0
    return DensityEstimate(float(window.mean()), stderr)


def _trace_from_zeta(n: int, zeta: np.ndarray) -> ProcessTrace:
    counts = np.concatenate(([n], np.rint(zeta * n).astype(np.int64)))
    zeros = np.flatnonzero(counts == 0)
    ext = int(zeros[0]) if zeros.size else None
    if ext is not None:
        counts = counts[:ext + 1]
    return ProcessTrace(n, zeta.size, counts, ext)


def build_graph(cfg: ExperimentConfig, n: int, rng: np.random.Generator) -> DirectedGraph:
    if cfg.model in ("rbn1", "rbn2"):
        return generate_rbn2(n, cfg.law, rng)
    if cfg.model == "rbn3":
        return generate_rbn3(n, cfg.law, cfg.in_law or cfg.law, rng, simple_mode=cfg.simple_mode).graph
    return generate_rbn4(n, cfg.law, rng, simple_mode=cfg.simple_mode).graph


def _run_replica(cfg: ExperimentConfig, n: int, q: float, p: Optional[float], replica: int,
                 pi_pred: float, regime: str, r_eff: float) -> SweepRow:
    seed = derive_seed(cfg.master_seed, n, q, replica)
    graph_seed = derive_seed(cfg.master_seed, n, q, 0) if cfg.quenched else seed
    base = dict(n=n, q=q, p=p, r_eff=r_eff, replica=replica, predicted_pi=pi_pred, regime=regime)
    try:
        g = build_graph(cfg, n, np.random.default_rng(graph_seed))
    except GenerationError as exc:
        return SweepRow(extinction_time=None, mean_density=None, density_stderr=None,
                        status=f"generation_failed: {exc}", **base)
    if cfg.dynamics == "tcp":
        trace = run_from_full(g, q, cfg.t_max, CoinStream(derive_seed(seed, 1), TAG_FORWARD))
    elif cfg.dynamics == "dual":
        trace = run_dual(reverse(g), q, 0, cfg.t_max, CoinStream(derive_seed(seed, 1), TAG_DUAL))
    else:
        oracle = BooleanFunctionOracle(derive_seed(seed, 2), p)
        state0 = np.random.default_rng(derive_seed(seed, 3)).integers(0, 2, n).astype(np.uint8)
        trace = _trace_from_zeta(n, change_process(g, oracle, state0, cfg.t_max))
    est = estimate_density(trace, cfg.effective_burn_in)
    return SweepRow(extinction_time=trace.extinction_time,
                    mean_density=None if est is None else est.mean,
                    density_stderr=None if est is None else est.stderr,
                    final_density=float(trace.densities(pad=True)[-1]), **base)


def _run_task(args) -> SweepRow:
    return _run_replica(*args)


def run_sweep(cfg: ExperimentConfig, workers: int = 1) -> SweepResult:
    """Run every (n, q, replica) cell.  Rows are sorted and depend only on ``cfg``."""
    notes = regime_warnings(cfg)
    for note in notes:
        warnings.warn(f"{cfg.name}: {note}", stacklevel=2)
    offspring = cfg.offspring_law()
    r_eff = cfg.r_eff()
    tasks = []
    for n in cfg.n_list:
        for q, p in cfg.grid():
            pi_pred = dist.survival_probability(offspring, q)
            regime = dist.classify(q, r_eff).regime.value
            for rep in range(cfg.replicas):
                tasks.append((cfg, int(n), q, p, rep, pi_pred, regime, r_eff))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_run_task, tasks, chunksize=max(1, len(tasks) // (4 * workers))))
    else:
        rows = [_run_task(t) for t in tasks]
    rows.sort(key=lambda r: (r.n, r.q, r.replica))
    for r in rows:
        if r.status != "ok":
            log.warning("n=%d q=%g replica=%d: %s", r.n, r.q, r.replica, r.status)
    return SweepResult(cfg, rows, notes)


@dataclass(frozen=True)
class CriticalEstimate:
    """Where the survival fraction crosses ``level``; ``q_c`` is None when out of range."""

    q_c: Optional[float]
    qs: tuple
    fractions: tuple
    t_star: int

    @property
    def in_range(self) -> bool:
        return self.q_c is not None


def crossing_point(qs: Sequence[float], fractions: Sequence[float], level: float = 0.5) -> Optional[float]:
    """First upward crossing of ``level`` by linear interpolation; None if the grid misses it."""
    qs = list(qs)
    fr = list(fractions)
    if not qs or fr[0] >= level:
        return None
    for i in range(1, len(qs)):
        if fr[i] >= level:
            lo, hi = fr[i - 1], fr[i]
            return qs[i - 1] + (level - lo) * (qs[i] - qs[i - 1]) / (hi - lo)
    return None


def locate_critical_q(cfg: ExperimentConfig, t_star: Optional[int] = None,
                      workers: int = 1) -> dict[int, CriticalEstimate]:
    """Per n, the q at which the fraction of replicas alive at ``t_star`` crosses 1/2.

    ``t_star`` defaults to 50 log n; runs stop there, so ``cfg.t_max`` is
    replaced by it.
    """
    out = {}
    for n in cfg.n_list:
        ts = crossing_horizon(n) if t_star is None else int(t_star)
        sub = replace(cfg, n_list=(n,), t_max=ts, burn_in=min(cfg.effective_burn_in, ts - 1))
        res = run_sweep(sub, workers=workers)
        qs = [q for q, _ in sub.grid()]
        order = np.argsort(qs, kind="stable")
        qs = [qs[i] for i in order]
        fr = [res.survival_fraction(n, q, ts) for q in qs]
        out[int(n)] = CriticalEstimate(crossing_point(qs, fr), tuple(qs), tuple(fr), ts)
    return out


# -- config files ----------------------------------------------------------

def parse_inline_pmf(text: str) -> Pmf:
    """``"2:0.5, 4:0.5"``."""
    weights = {}
    for part in text.split(","):
        k, p = part.split(":")
        weights[int(k)] = float(p)
    return Pmf.from_weights(weights)


def parse_inline_joint(text: str) -> JointPmf:
    """``"2 4:0.5; 4 2:0.5"``."""
    weights = {}
    for part in text.split(";"):
        kl, p = part.split(":")
        k, l = kl.split()
        weights[(int(k), int(l))] = float(p)
    total = sum(weights.values())
    return JointPmf({kl: w / total for kl, w in weights.items()})


def _floats(text: str) -> tuple[float, ...]:
    """Comma list, or ``start:stop:step`` with an inclusive stop."""
    text = text.strip()
    if text.count(":") == 2:
        a, b, s = (float(v) for v in text.split(":"))
        k = int(round((b - a) / s))
        return tuple(round(a + i * s, 12) for i in range(k + 1))
    return tuple(float(v) for v in text.split(",") if v.strip())


def _law(section, base: Path, key: str):
    if f"{key}_file" in section:
        path = base / section[f"{key}_file"]
        return dist.load_joint(path) if key == "joint" else dist.load_pmf(path)
    if key in section:
        return parse_inline_joint(section[key]) if key == "joint" else parse_inline_pmf(section[key])
    return None


def load_config(path) -> list[ExperimentConfig]:
    """INI file, one section per experiment.

    Keys: ``model``, ``dynamics``, ``pmf`` / ``pmf_file`` or ``joint`` /
    ``joint_file`` (``in_pmf`` / ``in_pmf_file`` for rbn3), ``r`` (rbn1),
    ``q`` or ``p``, ``n``, ``t_max``, ``replicas``, ``burn_in``, ``seed``,
    ``simple_mode``, ``quenched``.
    """
    path = Path(path)
    parser = configparser.ConfigParser()
    parser.read_string(path.read_text(), source=str(path))
    configs = []
    for name in parser.sections():
        sec = parser[name]
        model = sec.get("model", "rbn2")
        if model == "rbn1" and "r" in sec:
            law = Pmf.delta(sec.getint("r"))
        else:
            law = _law(sec, path.parent, "joint" if model == "rbn4" else "pmf")
        if law is None:
            raise PreconditionError(f"[{name}]: no degree law given")
        configs.append(ExperimentConfig(
            name=name,
            model=model,
            dynamics=sec.get("dynamics", "tcp"),
            law=law,
            in_law=_law(sec, path.parent, "in_pmf"),
            q_values=_floats(sec["q"]) if "q" in sec else (),
            p_values=_floats(sec["p"]) if "p" in sec else (),
            n_list=tuple(int(v) for v in _floats(sec["n"])),
            t_max=sec.getint("t_max"),
            replicas=sec.getint("replicas", 1),
            burn_in=sec.getint("burn_in") if "burn_in" in sec else None,
            master_seed=sec.getint("seed", 0),
            simple_mode=sec.getboolean("simple_mode", True),
            quenched=sec.getboolean("quenched", False),
        ))
    return configs
