"""Graph construction and Laplacian tests.

Derived expectations are computed by independent brute-force oracles
(densify-and-multiply, explicit pairwise-difference sums) rather than by
the code under test.
"""

import numpy as np
import pytest
import scipy.sparse as sp

from bipass.graphs import (
    Graph,
    degree_vector,
    laplacian,
    normalized_laplacian,
    smoothness,
    spmm,
    validate_csr,
)

# -- fixtures ---------------------------------------------------------------


def path2():
    return Graph.from_edges(2, [(0, 1)])


def triangle():
    return Graph.from_edges(3, [(0, 1), (0, 2), (1, 2)])


def empty3():
    return Graph.from_edges(3, [])


def random_graph(rng, n, p=0.5, weighted=False):
    edges, weights = [], []
    for i in range(n):
        for j in range(i + 1, n):
            if rng.random() < p:
                edges.append((i, j))
                weights.append(rng.uniform(0.5, 2.0) if weighted else 1.0)
    if not edges:
        edges, weights = [(0, 1)], [1.0]
    return Graph.from_edges(n, edges, weights)


# -- construction and validation --------------------------------------------


def test_from_edges_roundtrip():
    g = triangle()
    assert g.n == 3
    assert g.n_edges == 3
    assert g.edges() == [(0, 1), (0, 2), (1, 2)]


def test_adjacency_is_symmetric_csr():
    g = Graph.from_edges(4, [(0, 1), (1, 2), (2, 3)], [1.0, 2.0, 3.0])
    a = g.adjacency
    validate_csr(a)
    dense = a.toarray()
    assert np.array_equal(dense, dense.T)
    assert dense[1, 2] == 2.0


def test_rejects_self_loop():
    with pytest.raises(ValueError, match="self-loop"):
        Graph.from_edges(3, [(1, 1)])


def test_rejects_duplicate_edge():
    with pytest.raises(ValueError, match="duplicate"):
        Graph.from_edges(3, [(0, 1), (1, 0)])
    with pytest.raises(ValueError, match="duplicate"):
        Graph.from_edges(3, [(0, 1), (0, 1)])


def test_rejects_out_of_range_and_bad_weight():
    with pytest.raises(ValueError):
        Graph.from_edges(2, [(0, 2)])
    with pytest.raises(ValueError, match="positive"):
        Graph.from_edges(2, [(0, 1)], [-1.0])


def test_rejects_asymmetric_matrix():
    m = sp.csr_array(np.array([[0.0, 1.0], [0.0, 0.0]]))
    with pytest.raises(ValueError, match="symmetric"):
        Graph(2, m)


def test_rejects_nonzero_diagonal():
    m = sp.csr_array(np.array([[1.0, 1.0], [1.0, 0.0]]))
    with pytest.raises(ValueError):
        Graph(2, m)


def test_validate_csr_catches_bad_indptr():
    m = sp.csr_array((np.ones(2), np.array([0, 1]), np.array([0, 2, 1])), shape=(2, 2))
    with pytest.raises(ValueError):
        validate_csr(m)


def test_validate_csr_catches_nonfinite():
    m = sp.csr_array(np.array([[0.0, np.inf], [np.inf, 0.0]]))
    with pytest.raises(ValueError, match="finite"):
        validate_csr(m)


# -- degree_vector -----------------------------------------------------------


def test_degree_path():
    assert np.array_equal(degree_vector(path2()), [1.0, 1.0])


def test_degree_empty():
    assert np.array_equal(degree_vector(empty3()), [0.0, 0.0, 0.0])


def test_degree_triangle():
    assert np.array_equal(degree_vector(triangle()), [2.0, 2.0, 2.0])


# -- laplacian ---------------------------------------------------------------


def test_laplacian_path():
    L = laplacian(path2()).toarray()
    assert np.array_equal(L, [[1.0, -1.0], [-1.0, 1.0]])


def test_laplacian_empty_graph_is_zero():
    assert np.array_equal(laplacian(empty3()).toarray(), np.zeros((3, 3)))


def test_laplacian_triangle():
    g = triangle()
    L = laplacian(g).toarray()
    assert np.array_equal(L, 2.0 * np.eye(3) - g.adjacency.toarray())
    assert np.allclose(L.sum(axis=1), 0.0, atol=1e-12)


def test_laplacian_row_sums_zero_random():
    rng = np.random.default_rng(7)
    for _ in range(100):
        g = random_graph(rng, int(rng.integers(2, 9)), weighted=True)
        rows = laplacian(g).toarray().sum(axis=1)
        assert np.max(np.abs(rows)) <= 1e-12


# -- normalized_laplacian ----------------------------------------------------


def test_normalized_laplacian_path():
    L = normalized_laplacian(path2()).toarray()
    assert np.allclose(L, [[1.0, -1.0], [-1.0, 1.0]], atol=1e-15)


def test_normalized_laplacian_isolated_node():
    # node 2 isolated: its row must be the unit basis row
    g = Graph.from_edges(3, [(0, 1)])
    L = normalized_laplacian(g).toarray()
    assert np.array_equal(L[2], [0.0, 0.0, 1.0])
    assert np.array_equal(L[:, 2], [0.0, 0.0, 1.0])


def test_normalized_laplacian_cycle_spectrum():
    from bipass.spectral import symmetric_eig

    g = Graph.from_edges(4, [(0, 1), (1, 2), (2, 3), (0, 3)])
    dec = symmetric_eig(normalized_laplacian(g).toarray())
    assert np.allclose(dec.eigenvalues, [0.0, 1.0, 1.0, 2.0], atol=1e-10)


def test_normalized_laplacian_psd_random():
    rng = np.random.default_rng(11)
    g = random_graph(rng, 9, weighted=True)
    L = normalized_laplacian(g)
    for _ in range(100):
        v = rng.standard_normal(9)
        assert v @ (L @ v) >= -1e-10


# -- smoothness ----------------------------------------------------------------


def test_smoothness_constant_signal():
    L = laplacian(path2())
    assert smoothness(L, np.array([1.0, 1.0])) == 0.0


def test_smoothness_alternating_signal():
    L = laplacian(path2())
    assert smoothness(L, np.array([1.0, -1.0])) == 4.0


def test_smoothness_matches_pairwise_sum():
    rng = np.random.default_rng(3)
    for _ in range(20):
        g = random_graph(rng, 5, weighted=True)
        X = rng.standard_normal((5, 3))
        got = smoothness(laplacian(g), X)
        A = g.adjacency.toarray()
        want = 0.0
        for i in range(5):
            for j in range(5):
                want += 0.5 * A[i, j] * np.sum((X[i] - X[j]) ** 2)
        assert got == pytest.approx(want, rel=1e-10)


def test_smoothness_dimension_mismatch():
    with pytest.raises(ValueError):
        smoothness(laplacian(path2()), np.zeros((3, 2)))


# -- spmm ----------------------------------------------------------------------


def test_spmm_identity():
    I = sp.eye_array(4, format="csr")
    X = np.arange(8.0).reshape(4, 2)
    assert np.array_equal(spmm(I, X), X)


def test_spmm_zero():
    Z = sp.csr_array((3, 3))
    X = np.ones((3, 2))
    assert np.array_equal(spmm(Z, X), np.zeros((3, 2)))


def test_spmm_matches_dense():
    rng = np.random.default_rng(5)
    for _ in range(25):
        dense = rng.standard_normal((6, 6)) * (rng.random((6, 6)) < 0.4)
        S = sp.csr_array(dense)
        X = rng.standard_normal((6, 4))
        assert np.max(np.abs(spmm(S, X) - dense @ X)) <= 1e-12


def test_spmm_dimension_mismatch():
    with pytest.raises(ValueError):
        spmm(sp.eye_array(3, format="csr"), np.zeros((4, 2)))
