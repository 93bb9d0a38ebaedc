import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lazydash.hypergraph import EmptySetError, Hypergraph, UnknownVertexError


def test_first_vertex_gets_id_zero():
    g = Hypergraph()
    assert g.add_vertex("a") == 0
    assert g.counts() == (1, 0)


def test_payloads_are_not_deduplicated():
    g = Hypergraph()
    assert g.add_vertex("x") != g.add_vertex("x")


def test_sequential_ids():
    g = Hypergraph()
    assert [g.add_vertex(i) for i in range(100)] == list(range(100))


def test_simple_edge_and_forward_star():
    g = Hypergraph()
    for _ in range(3):
        g.add_vertex()
    assert g.add_hyperarc({0}, {1}) == 0
    a = g.add_hyperarc({0, 1}, {2})
    assert a in g.forward_star(0) and a in g.forward_star(1)
    assert g.forward_star(2) == frozenset()
    assert g.backward_star(2) == {a}
    assert g.counts() == (3, 2)


def test_empty_head_or_tail_rejected():
    g = Hypergraph()
    g.add_vertex()
    with pytest.raises(EmptySetError):
        g.add_hyperarc({0}, set())
    with pytest.raises(EmptySetError):
        g.add_hyperarc(set(), {0})


def test_unknown_vertex_rejected():
    g = Hypergraph()
    g.add_vertex()
    with pytest.raises(UnknownVertexError):
        g.add_hyperarc({0}, {7})
    with pytest.raises(UnknownVertexError):
        g.forward_star(3)


def test_forward_star_by_construction():
    g = Hypergraph()
    for _ in range(4):
        g.add_vertex()
    ids = [g.add_hyperarc({1 if k in (2, 5) else 0}, {3}) for k in range(6)]
    assert g.forward_star(1) == {ids[2], ids[5]}


def test_empty_graph_counts():
    assert Hypergraph().counts() == (0, 0)


def test_json_dump_is_stable():
    g = Hypergraph()
    g.add_vertex({"k": 1})
    g.add_vertex("b")
    g.add_hyperarc([1, 0], [1], "arc")
    d = json.loads(g.dump_json())
    assert d["hyperarcs"][0]["tail"] == [0, 1]
    assert g.dump_json() == g.dump_json()


def _random_graph(rng, n_vertices, n_arcs):
    g = Hypergraph()
    for i in range(n_vertices):
        g.add_vertex(i)
    for _ in range(n_arcs):
        t = rng.choice(n_vertices, size=min(n_vertices, int(rng.integers(1, 4))), replace=False)
        h = rng.choice(n_vertices, size=min(n_vertices, int(rng.integers(1, 4))), replace=False)
        g.add_hyperarc(t.tolist(), h.tolist())
    return g


def _brute_forward_star(g, v):
    return frozenset(a for a in g.arcs() if v in g.tail(a))


def test_forward_star_matches_brute_force_on_random_graphs():
    agree = 0
    for k in range(100):
        rng = np.random.default_rng(k)
        g = _random_graph(rng, int(rng.integers(1, 40)), int(rng.integers(0, 200)))
        agree += all(g.forward_star(v) == _brute_forward_star(g, v) for v in g.vertices())
    assert agree == 100


def test_forward_star_large_graph():
    rng = np.random.default_rng(7)
    g = _random_graph(rng, 500, 10_000)
    for v in g.vertices():
        assert g.forward_star(v) == _brute_forward_star(g, v)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.sets(st.integers(0, 9), min_size=1, max_size=3),
                          st.sets(st.integers(0, 9), min_size=1, max_size=3)), max_size=40))
def test_counts_monotone_and_star_grows_by_one_arc(arcs):
    g = Hypergraph()
    for i in range(10):
        g.add_vertex(i)
    prev = g.counts()
    for t, h in arcs:
        before = {v: g.forward_star(v) for v in t}
        a = g.add_hyperarc(t, h)
        for v in t:
            assert g.forward_star(v) == before[v] | {a}
        now = g.counts()
        assert now[0] >= prev[0] and now[1] == prev[1] + 1
        prev = now
