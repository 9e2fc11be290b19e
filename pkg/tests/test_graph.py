import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cgdesign import graph as gr
from cgdesign.graph import ConvergenceError, GraphError

from _util import dense_lambda, distances


@st.composite
def graphs(draw, max_n=12):
    n = draw(st.integers(1, max_n))
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    chosen = draw(st.lists(st.sampled_from(pairs), max_size=len(pairs))) if pairs else []
    return gr.from_edge_list(n, chosen)


# -- construction -------------------------------------------------------------


def test_triangle_with_loops():
    g = gr.from_edge_list(3, [(0, 1), (1, 2), (0, 2)], self_loops=True)
    assert g.num_edges == 3
    assert g.self_loops.all()
    assert g.neighbors(1).tolist() == [0, 2]


def test_dedup_symmetric_pair():
    g = gr.from_edge_list(2, [(0, 1), (1, 0)])
    assert g.num_edges == 1
    assert g.edges().tolist() == [[0, 1]]


@pytest.mark.parametrize("edges", [[(0, 3)], [(-1, 0)]])
def test_out_of_range(edges):
    with pytest.raises(GraphError):
        gr.from_edge_list(3, edges)


def test_loop_in_edge_list_rejected():
    with pytest.raises(GraphError):
        gr.from_edge_list(3, [(1, 1)])


def test_arrays_read_only():
    g = gr.path(3)
    with pytest.raises(ValueError):
        g.indices[0] = 2


@given(graphs())
def test_graph_invariants(g):
    a = g.adjacency(loops=False).toarray()
    assert np.array_equal(a, a.T)
    assert np.all(np.diag(a) == 0)
    for i in range(g.n):
        nb = g.neighbors(i)
        assert np.all(np.diff(nb) > 0)
        assert i not in nb


# -- power graph --------------------------------------------------------------


def test_power_graph_path():
    h = gr.power_graph_two(gr.path(3))
    assert h == gr.clique(3).with_self_loops()


def test_power_graph_edgeless():
    h = gr.power_graph_two(gr.empty(4))
    assert h.num_edges == 0 and h.self_loops.all()


def test_power_graph_star_is_k5():
    assert gr.power_graph_two(gr.star(5)) == gr.clique(5).with_self_loops()


@given(graphs())
def test_power_graph_matches_distances(g):
    h = gr.power_graph_two(g)
    d = distances(g)
    expect = (d <= 2) & ~np.eye(g.n, dtype=bool)
    assert np.array_equal(h.adjacency(loops=False).toarray() > 0, expect)
    assert h.self_loops.all()


# -- spectral -----------------------------------------------------------------


@pytest.mark.parametrize(
    "g, lam",
    [
        (gr.clique(3).with_self_loops(), 3.0),
        (gr.star(4).with_self_loops(), 1 + math.sqrt(3)),
        (gr.empty(1).with_self_loops(), 1.0),
        (gr.path(3).with_self_loops(), 1 + math.sqrt(2)),
    ],
)
def test_largest_eigenvalue_examples(g, lam):
    assert gr.largest_eigenvalue(g).lam == pytest.approx(lam, abs=1e-9)


def test_eigen_residual_and_positivity():
    rng = np.random.default_rng(1)
    g = gr.preferential_attachment(200, 3, 1.0, rng).with_self_loops()
    res = gr.largest_eigenvalue(g)
    a = g.adjacency()
    v = res.vector
    assert np.all(v >= 0)
    assert np.linalg.norm(v) == pytest.approx(1.0)
    assert np.max(np.abs(a @ v - res.lam * v)) <= 1e-10 * res.lam * 1.0001


def test_disconnected_components_each_unit():
    g = gr.from_edge_list(5, [(0, 1), (2, 3), (3, 4)], self_loops=True)
    res = gr.largest_eigenvalue(g)
    assert res.lam == pytest.approx(1 + math.sqrt(2))
    for c in np.unique(res.components):
        assert np.linalg.norm(res.vector[res.components == c]) == pytest.approx(1.0)


def test_bipartite_does_not_oscillate():
    # a loop-free even cycle has spectrum symmetric about 0
    g = gr.from_edge_list(4, [(0, 1), (1, 2), (2, 3), (3, 0)])
    assert gr.largest_eigenvalue(g).lam == pytest.approx(2.0)


def test_non_convergence_reports_residual():
    g = gr.preferential_attachment(100, 2, 1.0, np.random.default_rng(0)).with_self_loops()
    with pytest.raises(ConvergenceError) as info:
        gr.largest_eigenvalue(g, tol=1e-15, max_iter=3)
    assert info.value.residual > 0


def test_empty_graph_rejected():
    with pytest.raises(GraphError):
        gr.largest_eigenvalue(gr.empty(0))


@settings(max_examples=50, deadline=None)
@given(graphs(max_n=15))
def test_matches_dense_eigvalsh(g):
    h = g.with_self_loops()
    assert gr.largest_eigenvalue(h).lam == pytest.approx(dense_lambda(h.adjacency().toarray()), abs=1e-8)


def test_self_loop_shift():
    rng = np.random.default_rng(7)
    for _ in range(50):
        n = int(rng.integers(2, 40))
        g = gr.erdos_renyi(n, float(rng.uniform(0.05, 0.5)), rng)
        if g.num_edges == 0:
            continue
        lam0 = gr.largest_eigenvalue(g).lam
        lam1 = gr.largest_eigenvalue(g.with_self_loops()).lam
        assert lam1 == pytest.approx(lam0 + 1, abs=1e-8)


@settings(max_examples=60, deadline=None)
@given(graphs(max_n=15))
def test_spectral_sandwich(g):
    h = gr.power_graph_two(g)
    lam = gr.largest_eigenvalue(h).lam
    deg = h.loop_degrees
    assert deg.mean() - 1e-9 <= lam <= deg.max() + 1e-9


# -- walks --------------------------------------------------------------------


def test_walk_examples():
    tri = gr.clique(3)
    assert gr.walk_count(tri, 0, 1, 2) == 1
    assert gr.walk_count(tri, 0, 1, 1) == 1
    p = gr.path(3)
    assert gr.walk_count(p, 0, 2, 3) == 0
    assert gr.walk_count(p, 0, 2, 2) == 1


def test_walk_length_checked():
    with pytest.raises(GraphError):
        gr.walk_count(gr.path(3), 0, 1, 5)


@settings(max_examples=30, deadline=None)
@given(graphs(max_n=15), st.integers(1, 4))
def test_walk_count_matches_matrix_power(g, s):
    a = g.adjacency(loops=False, dtype=np.int64).toarray()
    ref = np.linalg.matrix_power(a, s)
    assert np.array_equal(gr.walk_count_matrix(g, s), ref)
    i, j = 0, g.n - 1
    assert gr.walk_count(g, i, j, s) == ref[i, j]


def test_walks_ignore_self_loops():
    g = gr.path(3).with_self_loops()
    assert gr.walk_count(g, 0, 0, 2) == 1


# -- generators ---------------------------------------------------------------


def test_star_degrees():
    assert gr.star(4).degrees.tolist() == [3, 1, 1, 1]


def test_clique_of_cliques_16():
    g = gr.clique_of_cliques(16)
    assert g.n == 16
    assert g.degrees[0] == 6
    assert g.degrees[1] == 3
    assert sorted(set(g.degrees.tolist())) == [3, 6]


def test_clique_of_cliques_rounds_up():
    assert gr.clique_of_cliques(10).n == 16


@pytest.mark.parametrize("r_exp", [0.0, 1.0, 1.5])
def test_preferential_attachment_shape(r_exp):
    n, m = 300, 4
    g = gr.preferential_attachment(n, m, r_exp, np.random.default_rng(3))
    assert g.num_edges == (n - m) * m
    # each arrival has exactly m distinct earlier neighbors
    for t in range(m, n):
        assert np.count_nonzero(g.neighbors(t) < t) == m


def test_preferential_attachment_hubs_grow_with_exponent():
    rng = np.random.default_rng(11)
    d1 = gr.preferential_attachment(500, 4, 1.0, rng).degrees.max()
    d15 = gr.preferential_attachment(500, 4, 1.5, rng).degrees.max()
    assert d15 > d1


def test_preferential_attachment_deterministic():
    a = gr.preferential_attachment(100, 3, 1.5, np.random.default_rng(5))
    b = gr.preferential_attachment(100, 3, 1.5, np.random.default_rng(5))
    assert a == b


def test_preferential_attachment_invalid():
    with pytest.raises(GraphError):
        gr.preferential_attachment(3, 3, 1.0, np.random.default_rng(0))


def test_hub_cliques_layout():
    n = 256
    lay = gr.hub_cliques_layout(n)
    t = math.ceil(math.sqrt(n) * math.log(n))
    assert lay.block_size == t
    assert len(lay.secondary) == math.ceil(n / t)
    g = gr.hub_cliques(n)
    assert g.n == 1 + len(lay.secondary) + n
    assert g.degrees[0] == n
    assert sum(b.size for b in lay.blocks) == n
    for k, block in zip(lay.secondary, lay.blocks):
        assert g.neighbors(k).tolist() == block.tolist()
    assert np.all(g.degrees[1 + len(lay.secondary):] == 2)


# -- files --------------------------------------------------------------------


def test_edge_list_round_trip(tmp_path):
    g = gr.preferential_attachment(40, 2, 1.0, np.random.default_rng(2))
    path = tmp_path / "g.el"
    gr.write_edge_list(g, path)
    assert gr.read_edge_list(path) == g


@pytest.mark.parametrize("text", ["3\n0 1\n", "n 3\n0 x\n", "n 2\n0 2\n"])
def test_edge_list_malformed(tmp_path, text):
    path = tmp_path / "bad.el"
    path.write_text(text)
    with pytest.raises(GraphError):
        gr.read_edge_list(path)
