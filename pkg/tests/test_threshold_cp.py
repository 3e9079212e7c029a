import math

import numpy as np
import pytest

from rbnsim.dist import JointPmf, Pmf
from rbnsim.errors import PreconditionError
from rbnsim.exact_oracle import hit_probability
from rbnsim.graphgen import DirectedGraph, generate_rbn2, generate_rbn4, random_digraph, reverse
from rbnsim.keyed import CoinStream, TAG_DUAL
from rbnsim.threshold_cp import (as_mask, coupled_runs, dual_step, eligible, members, run_dual,
                                 run_from_full, run_tcp, tcp_step)


def cycle(n):
    return DirectedGraph.from_edges(n, np.arange(n), (np.arange(n) + 1) % n)


@pytest.fixture
def g():
    return generate_rbn2(300, Pmf({2: 0.5, 4: 0.5}), np.random.default_rng(1))


class TestForwardStep:
    def test_empty_absorbing(self, g):
        assert not tcp_step(g, 0.5, np.zeros(g.n, dtype=bool), CoinStream(0)).any()

    def test_q_one_is_eligible_set(self, g):
        xi = as_mask(g.n, range(0, 300, 7))
        expected = {x for x in range(g.n) if set(g.inputs(x).tolist()) & members(xi)}
        assert members(tcp_step(g, 1.0, xi, CoinStream(0))) == expected
        assert members(eligible(g, xi)) == expected

    def test_q_zero(self, g):
        assert not tcp_step(g, 0.0, np.ones(g.n, dtype=bool), CoinStream(0)).any()

    def test_support(self, g):
        coins = CoinStream(4)
        xi = as_mask(g.n, range(0, 300, 3))
        for t in range(10):
            nxt = tcp_step(g, 0.6, xi, coins, t)
            assert not (nxt & ~eligible(g, xi)).any()
            xi = nxt

    def test_multi_edges_count_once(self):
        multi = DirectedGraph.from_edges(2, [0, 0], [1, 1])
        single = DirectedGraph.from_edges(2, [0], [1])
        xi = as_mask(2, [0])
        for seed in range(20):
            c = CoinStream(seed)
            assert np.array_equal(tcp_step(multi, 0.5, xi, c), tcp_step(single, 0.5, xi, c))

    def test_rejects_q(self, g):
        with pytest.raises(PreconditionError):
            tcp_step(g, 1.5, np.ones(g.n, dtype=bool), CoinStream(0))

    def test_thinning_frequency(self, g):
        xi = np.ones(g.n, dtype=bool)
        total = sum(tcp_step(g, 0.3, xi, CoinStream(0), t).sum() for t in range(200))
        m = 200 * g.n
        assert abs(total / m - 0.3) < 4 * math.sqrt(0.21 / m)


class TestRunFromFull:
    def test_q_zero(self, g):
        tr = run_from_full(g, 0.0, 50, CoinStream(0))
        assert tr.extinction_time == 1
        assert tr.densities().tolist() == [1.0, 0.0]
        assert tr.densities(pad=True).shape == (51,)

    def test_isolated_node(self):
        tr = run_from_full(DirectedGraph.from_edges(1, [], []), 0.9, 10, CoinStream(0))
        assert tr.extinction_time == 1

    def test_two_cycle_q_one(self):
        tr = run_from_full(cycle(2), 1.0, 25, CoinStream(0))
        assert tr.censored and (tr.densities() == 1.0).all() and tr.counts.size == 26

    def test_trace_invariants(self, g):
        tr = run_from_full(g, 0.3, 200, CoinStream(2))
        d = tr.densities(pad=True)
        assert ((d >= 0) & (d <= 1)).all()
        if not tr.censored:
            assert (d[tr.extinction_time:] == 0).all()

    def test_determinism(self, g):
        a = run_from_full(g, 0.45, 100, CoinStream(5))
        b = run_from_full(g, 0.45, 100, CoinStream(5))
        assert np.array_equal(a.counts, b.counts)

    def test_csv_and_meta(self):
        tr = run_from_full(cycle(2), 0.0, 3, CoinStream(0))
        assert tr.to_csv() == "t,occupied_count,density\n0,2,1\n1,0,0\n"
        tr.meta["q"] = 0.0
        assert '"extinction_time": 1' in tr.metadata_json()


class TestDual:
    def test_empty(self, g):
        assert not dual_step(reverse(g), 0.5, np.zeros(g.n, dtype=bool), CoinStream(0)).any()

    def test_q_one_is_star_one(self, g):
        gr = reverse(g)
        xi = as_mask(g.n, [0, 5, 17])
        expected = set()
        for x in (0, 5, 17):
            expected.update(gr.outputs(x).tolist())
        assert members(dual_step(gr, 1.0, xi, CoinStream(0))) == expected

    def test_childless_leaf(self):
        gr = DirectedGraph.from_edges(2, [1], [0])   # node 0 has no children
        for seed in range(10):
            assert not dual_step(gr, 0.7, as_mask(2, [0]), CoinStream(seed)).any()

    def test_isolated_extinct(self):
        tr = run_dual(DirectedGraph.from_edges(3, [0], [1]), 0.5, 2, 10, CoinStream(0))
        assert tr.extinction_time == 1

    def test_cycle_q_one(self):
        tr = run_dual(cycle(5), 1.0, 0, 40, CoinStream(0))
        assert tr.censored and (tr.counts == 1).all()

    def test_support(self, g):
        gr = reverse(g)
        coins = CoinStream(3, TAG_DUAL)
        xi = as_mask(g.n, range(0, 300, 11))
        for t in range(8):
            nxt = dual_step(gr, 0.5, xi, coins, t)
            assert not (nxt & ~eligible(gr, xi)).any()
            xi = nxt

    def test_survival_frequency_vs_exact(self):
        gen = np.random.default_rng(21)
        g = random_digraph(8, 0.3, gen)
        gr = reverse(g)
        q, t, runs = 0.5, 4, 10**4
        alive = sum(run_dual(gr, q, 0, t, CoinStream(s, TAG_DUAL)).survived_to(t) for s in range(runs))
        exact = hit_probability(gr, q, [0], range(8), t, kind="dual")
        sd = math.sqrt(exact * (1 - exact) / runs)
        assert abs(alive / runs - exact) < 3 * sd


class TestCoupling:
    @pytest.mark.parametrize("seed", range(20))
    def test_monotone_in_initial_set(self, seed):
        r = np.random.default_rng(seed)
        g = random_digraph(int(r.integers(3, 12)), float(r.uniform(0.1, 0.5)), r)
        big = r.random(g.n) < 0.6
        small = big & (r.random(g.n) < 0.5)
        a, b = coupled_runs(g, float(r.uniform(0.2, 0.9)), [small, big], 15, CoinStream(seed))
        for xa, xb in zip(a, b):
            assert not (xa & ~xb).any()


@pytest.mark.parametrize("seed", range(3))
def test_hitting_frequency_vs_exact(seed):
    r = np.random.default_rng(100 + seed)
    g = random_digraph(7, 0.35, r)
    q, t, runs = 0.5, 3, 2 * 10**4
    A, B = [0, 1], [4, 5, 6]
    hits = 0
    coins_seed = 10**6 * (seed + 1)
    for s in range(runs):
        tr_mask = as_mask(7, A)
        c = CoinStream(coins_seed + s)
        for k in range(t):
            tr_mask = tcp_step(g, q, tr_mask, c, k)
        hits += bool(tr_mask[B].any())
    p_hat = hits / runs
    exact = hit_probability(g, q, A, B, t)
    assert abs(p_hat - exact) < 4 * math.sqrt(max(p_hat * (1 - p_hat), 1e-12) / runs) + 1e-12


def test_rbn4_graph_runs():
    b = generate_rbn4(300, JointPmf({(2, 4): 0.5, (4, 2): 0.5}), np.random.default_rng(0))
    tr = run_tcp(b.graph, 0.45, np.ones(300, dtype=bool), 50, CoinStream(0))
    assert tr.counts[0] == 300
