import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from idnc_d2d.clique import (
    CliqueBudgetExceeded,
    WeightedGraph,
    brute_force_clique,
    lex_pack,
    lex_unpack,
    lex_weight,
    max_weight_clique,
)


@st.composite
def graphs(draw, max_n=12):
    n = draw(st.integers(0, max_n))
    weights = draw(st.lists(st.one_of(st.integers(0, 3).map(float), st.floats(0, 5)), min_size=n, max_size=n))
    adj = [0] * n
    for i in range(n):
        for j in range(i + 1, n):
            if draw(st.booleans()):
                adj[i] |= 1 << j
                adj[j] |= 1 << i
    return WeightedGraph(weights, adj)


def test_triangle():
    g = WeightedGraph.from_matrix([1, 1, 1], np.ones((3, 3)))
    assert max_weight_clique(g) == [0, 1, 2]


def test_path_tie_break():
    g = WeightedGraph.from_matrix([2, 3, 2], [[0, 1, 0], [1, 0, 1], [0, 1, 0]])
    assert max_weight_clique(g) == [0, 1]
    assert brute_force_clique(g) == [0, 1]


def test_small_cases():
    assert max_weight_clique(WeightedGraph([], [])) == []
    assert brute_force_clique(WeightedGraph([4.0], [0])) == [0]
    edgeless = WeightedGraph([1.0, 3.0, 2.0], [0, 0, 0])
    assert max_weight_clique(edgeless) == brute_force_clique(edgeless) == [1]
    assert max_weight_clique(WeightedGraph([0.0, 0.0], [2, 1])) == []


def test_validation():
    with pytest.raises(ValueError):
        WeightedGraph([1.0, 1.0], [2, 0])  # asymmetric
    with pytest.raises(ValueError):
        WeightedGraph([-1.0], [0])
    with pytest.raises(ValueError):
        WeightedGraph([1.0], [1])  # self loop
    with pytest.raises(ValueError):
        brute_force_clique(WeightedGraph([1.0] * 21, [0] * 21))


def test_budget_raises():
    n = 40
    rng = np.random.default_rng(3)
    adj = [0] * n
    for i in range(n):
        for j in range(i + 1, n):
            if rng.random() < 0.8:
                adj[i] |= 1 << j
                adj[j] |= 1 << i
    g = WeightedGraph(list(rng.uniform(1, 2, n)), adj)
    with pytest.raises(CliqueBudgetExceeded):
        max_weight_clique(g, node_budget=5)


@settings(max_examples=300, deadline=None)
@given(graphs())
def test_matches_brute_force(g):
    got = max_weight_clique(g)
    assert got == brute_force_clique(g)
    assert g.is_clique(got)


@settings(max_examples=100, deadline=None)
@given(graphs(max_n=10))
def test_isolated_zero_vertex_is_ignored(g):
    n = g.n
    bigger = WeightedGraph(g.weights + [0.0], g.adj + [0])
    assert max_weight_clique(bigger) == max_weight_clique(g)
    assert n not in max_weight_clique(bigger)


@settings(max_examples=100, deadline=None)
@given(graphs(max_n=10), st.sampled_from([0.5, 2.0, 4.0]))
def test_scaling_invariance(g, c):
    scaled = WeightedGraph([w * c for w in g.weights], g.adj)
    assert max_weight_clique(scaled) == max_weight_clique(g)


def test_lex_weights_order():
    assert lex_pack(1, 0, 0) > lex_pack(0, 10**15, 10**15)
    assert lex_weight(0, 1.0, 0) > lex_weight(0, 0.999, 50.0)
    assert lex_unpack(lex_pack(3, 4, 5), 3) == (3, 4, 5)
    with pytest.raises(ValueError):
        lex_pack(-1)


def test_integer_lex_weights_in_clique():
    # vertex 0 alone beats the pair {1, 2} on the first component
    w = [lex_pack(1, 0), lex_pack(0, 9), lex_pack(0, 9)]
    g = WeightedGraph(w, [0, 4, 2])
    assert max_weight_clique(g) == [0]
