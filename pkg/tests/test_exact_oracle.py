import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rbnsim.errors import OracleCapError, PreconditionError
from rbnsim.exact_oracle import (StateDistribution, duality_suite, evolve, exact_evolve, from_bitmask,
                                 hit_probability, neighborhood_table, to_bitmask, verify_duality)
from rbnsim.graphgen import DirectedGraph, random_digraph, reverse

from oracles import dual_transition, evolve_dict, forward_transition


def two_cycle():
    return DirectedGraph.from_edges(2, [0, 1], [1, 0])


def assert_same_law(got: dict, expected: dict, tol=1e-12):
    keys = set(got) | set(expected)
    for k in keys:
        assert abs(got.get(k, 0.0) - expected.get(k, 0.0)) < tol, k


def test_bitmask_round_trip():
    assert to_bitmask([0, 3]) == 9
    assert from_bitmask(9) == {0, 3}
    assert from_bitmask(0) == set()


def test_neighborhood_table():
    g = DirectedGraph.from_edges(3, [0, 0, 2], [1, 2, 0])
    table = neighborhood_table(g)
    for S in range(8):
        expected = set()
        for v in from_bitmask(S):
            expected.update(g.outputs(v).tolist())
        assert from_bitmask(int(table[S])) == expected


class TestExamples:
    def test_empty_stays_empty(self):
        g = random_digraph(5, 0.5, np.random.default_rng(0))
        assert evolve(g, 0.7, [], 4).as_dict() == {frozenset(): 1.0}

    def test_q_one_forward_is_deterministic_push(self):
        g = DirectedGraph.from_edges(3, [0, 1], [1, 2])
        assert evolve(g, 1.0, [0], 1).as_dict() == {frozenset({1}): 1.0}
        assert evolve(g, 1.0, [0], 2).as_dict() == {frozenset({2}): 1.0}

    def test_two_cycle_half(self):
        law = evolve(two_cycle(), 0.5, [0], 1).as_dict()
        assert law == {frozenset(): 0.5, frozenset({1}): 0.5}
        assert hit_probability(two_cycle(), 0.5, [0], [1], 1) == 0.5

    def test_time_zero(self):
        g = random_digraph(4, 0.5, np.random.default_rng(1))
        assert hit_probability(g, 0.3, [1, 2], [2], 0) == 1.0
        assert hit_probability(g, 0.3, [1], [2], 0) == 0.0

    def test_cap(self):
        g = DirectedGraph.from_edges(15, [], [])
        with pytest.raises(OracleCapError):
            evolve(g, 0.5, [0], 1)
        assert evolve(g, 0.5, [0], 1, cap=15).total() == pytest.approx(1.0)

    def test_rejects(self):
        g = two_cycle()
        with pytest.raises(PreconditionError):
            exact_evolve(g, 0.5, StateDistribution.point(2, 0), kind="sideways")
        with pytest.raises(PreconditionError):
            exact_evolve(g, 1.5, StateDistribution.point(2, 0))
        with pytest.raises(PreconditionError):
            StateDistribution.point(2, 4)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 6), st.floats(0.1, 0.7), st.floats(0, 1), st.integers(0, 4), st.integers(0, 2**32 - 1))
def test_forward_against_enumeration(n, prob, q, t, seed):
    r = np.random.default_rng(seed)
    g = random_digraph(n, prob, r)
    start = frozenset(from_bitmask(int(r.integers(0, 1 << n))))
    inputs = [g.inputs(x).tolist() for x in range(n)]
    expected = evolve_dict(lambda S: forward_transition(n, inputs, q, S), start, t)
    assert_same_law(evolve(g, q, start, t).as_dict(), expected)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 6), st.floats(0.1, 0.7), st.floats(0, 1), st.integers(0, 4), st.integers(0, 2**32 - 1))
def test_dual_against_enumeration(n, prob, q, t, seed):
    r = np.random.default_rng(seed)
    g = random_digraph(n, prob, r)
    gr = reverse(g)
    start = frozenset(from_bitmask(int(r.integers(0, 1 << n))))
    children = [gr.outputs(x).tolist() for x in range(n)]
    expected = evolve_dict(lambda S: dual_transition(n, children, q, S), start, t)
    assert_same_law(evolve(gr, q, start, t, kind="dual").as_dict(), expected)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 10), st.floats(0, 1), st.integers(0, 2**32 - 1))
def test_mass_conservation(n, q, seed):
    r = np.random.default_rng(seed)
    g = random_digraph(n, 0.4, r)
    for kind, graph in (("forward", g), ("dual", reverse(g))):
        dist = evolve(graph, q, int(r.integers(0, 1 << n)), 5, kind=kind)
        assert abs(dist.total() - 1.0) < 1e-12
        assert (dist.masses >= 0).all()


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 8), st.integers(0, 2**32 - 1))
def test_hit_probability_monotone(n, seed):
    r = np.random.default_rng(seed)
    g = random_digraph(n, 0.4, r)
    big = int(r.integers(1, 1 << n))
    small = big & int(r.integers(0, 1 << n))
    B = int(r.integers(1, 1 << n))
    t = int(r.integers(0, 5))
    qs = sorted(float(x) for x in r.uniform(0, 1, 2))
    # monotone in the starting set
    assert hit_probability(g, qs[1], small, B, t) <= hit_probability(g, qs[1], big, B, t) + 1e-12
    # and in q
    assert hit_probability(g, qs[0], big, B, t) <= hit_probability(g, qs[1], big, B, t) + 1e-12


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 10), st.floats(0.05, 0.7), st.floats(0, 1), st.integers(0, 6), st.integers(0, 2**32 - 1))
def test_duality_identity(n, prob, q, t, seed):
    r = np.random.default_rng(seed)
    g = random_digraph(n, prob, r)
    A = int(r.integers(0, 1 << n))
    B = int(r.integers(0, 1 << n))
    assert verify_duality(g, q, A, B, t).abs_diff < 1e-10


def test_duality_suite():
    rows = duality_suite([4, 6, 8], 30, np.random.default_rng(3))
    assert len(rows) == 30
    assert max(r.diff for r in rows) < 1e-10
    assert {r.n for r in rows} <= {4, 6, 8}


def test_duality_suite_deterministic():
    a = duality_suite(6, 10, np.random.default_rng(7))
    b = duality_suite(6, 10, np.random.default_rng(7))
    assert a == b
