"""Threshold contact processes and random Boolean networks on random directed graphs."""

from .dist import (JointPmf, Pmf, Regime, classify, gamma, moments, q_from_bias,
                   size_biased_in_marginal, survival_probability)
from .graphgen import (DirectedGraph, generate_rbn1, generate_rbn2, generate_rbn3,
                       generate_rbn4, out_cluster, reverse)
from .keyed import CoinStream
from .threshold_cp import ProcessTrace, dual_step, run_dual, run_from_full, tcp_step

__version__ = "0.1.0"
