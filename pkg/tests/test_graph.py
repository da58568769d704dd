import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mlgkernel.errors import InvalidInputError
from mlgkernel.graph import (Graph, ball, build_neighborhood_stack, hop_distances,
                             induced_subgraph, laplacian, laplacian_solve, permute,
                             random_graph)

from conftest import cycle_graph, path_graph


def test_triangle_laplacian():
    g = Graph(3, [(0, 1), (1, 2), (0, 2)])
    L = laplacian(g, 0.5)
    expected = np.array([[2.5, -1, -1], [-1, 2.5, -1], [-1, -1, 2.5]])
    np.testing.assert_array_equal(L, expected)


def test_weighted_laplacian_rows_sum_to_eta():
    g = Graph(3, [(0, 1, 2.0), (1, 2, 0.5)])
    L = laplacian(g, 0.1)
    np.testing.assert_allclose(L.sum(axis=1), 0.1)
    assert L[0, 1] == -2.0 and L[1, 1] == 2.6


def test_edges_normalized_and_defaulted():
    g = Graph(3, [(2, 0), (1, 0, 3.0)])
    assert g.edges == ((0, 1, 3.0), (0, 2, 1.0))
    assert g.num_edges == 2
    assert g.degrees.tolist() == [2, 1, 1]


@pytest.mark.parametrize("edges", [[(0, 0)], [(0, 5)], [(0, 1), (1, 0)], [(0, 1, -1.0)],
                                   [(0, 1, 0.0)]])
def test_invalid_edges(edges):
    with pytest.raises(InvalidInputError):
        Graph(3, edges)


def test_isolated_vertex_laplacian_is_eta():
    L = laplacian(Graph(2, []), 0.3)
    np.testing.assert_array_equal(L, 0.3 * np.eye(2))


def test_laplacian_solve_matches_dense_inverse(rng):
    g = random_graph(rng, 7, weighted=True)
    B = rng.normal(size=(7, 3))
    np.testing.assert_allclose(laplacian_solve(g, 0.05, B),
                               np.linalg.inv(laplacian(g, 0.05)) @ B, rtol=1e-9, atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 9), st.floats(0.01, 1.0), st.integers(0, 2**32 - 1))
def test_laplacian_spectrum_at_least_eta(n, eta, seed):
    g = random_graph(np.random.default_rng(seed), n, weighted=True)
    w = np.linalg.eigvalsh(laplacian(g, eta))
    assert w.min() >= eta - 1e-9


def test_ball_on_path():
    g = path_graph(6)
    assert ball(g, 2, 0) == {2}
    assert ball(g, 2, 1) == {1, 2, 3}
    assert ball(g, 0, 2) == {0, 1, 2}
    assert hop_distances(g, 0)[5] == 5


def test_induced_subgraph_local_order():
    g = cycle_graph(5, labels=[0, 1, 2, 0, 1])
    sub = induced_subgraph(g, {4, 0, 1})
    assert sub.parent_vertices == (0, 1, 4)
    assert sub.edges == ((0, 1, 1.0), (0, 2, 1.0))
    assert sub.node_labels.tolist() == [0, 1, 1]
    with pytest.raises(InvalidInputError):
        induced_subgraph(g, [])


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 10), st.integers(1, 3), st.integers(1, 3), st.integers(0, 2**32 - 1))
def test_union_rule_doubles_radius(n, r0, levels, seed):
    # an independent description of the nested neighborhoods: plain balls of
    # radius r0 * 2^(l-1)
    g = random_graph(np.random.default_rng(seed), n, p=0.2, connected=False)
    stack = build_neighborhood_stack(g, r0, levels)
    for lv in range(1, levels + 1):
        for v in range(n):
            assert stack.neighborhood(lv, v) == ball(g, v, r0 * 2 ** (lv - 1))
            if lv > 1:
                assert stack.neighborhood(lv - 1, v) <= stack.neighborhood(lv, v)


def test_equal_neighborhoods_share_subgraph_object():
    g = Graph(3, [(0, 1), (1, 2), (0, 2)], features=np.ones((3, 1)))
    stack = build_neighborhood_stack(g, 1, 2)
    assert stack.subgraph(1, 0) is stack.subgraph(1, 2) is stack.subgraph(2, 1)


def test_permute_conjugates_laplacian(rng):
    g = random_graph(rng, 6, weighted=True)
    perm = rng.permutation(6)
    h = permute(g, perm)
    P = np.eye(6)[perm]  # maps vertex i to perm[i]
    np.testing.assert_allclose(laplacian(h, 0.1), P.T @ laplacian(g, 0.1) @ P)
    np.testing.assert_array_equal(h.features[perm], g.features)
    with pytest.raises(InvalidInputError):
        permute(g, [0, 0, 1, 2, 3, 4])
