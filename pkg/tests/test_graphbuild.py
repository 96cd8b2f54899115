import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from armac3 import graphbuild as gb
from armac3.errors import ConfigError, DataError, DegenerateError, DegenerateRowWarning, FormatError

from conftest import random_stochastic


def random_graph(rng, n, density=0.3):
    W = rng.random((n, n))
    W = np.triu(W * (rng.random((n, n)) < density), 1)
    W = W + W.T
    W[0, 1] = W[1, 0] = 0.7  # at least one edge
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        return gb.sparsify(W, 0.0)


def test_cosine_similarity_basic():
    W = gb.cosine_similarity([[1.0, 0.0], [1.0, 1.0], [0.0, 2.0]])
    r = 1 / np.sqrt(2)
    np.testing.assert_allclose(W, [[1, r, 0], [r, 1, r], [0, r, 1]], atol=1e-15)


def test_cosine_similarity_zero_row():
    with pytest.warns(DegenerateRowWarning):
        W = gb.cosine_similarity([[0.0, 0.0], [1.0, 1.0]])
    np.testing.assert_array_equal(W, [[0.0, 0.0], [0.0, 1.0]])


def test_cosine_similarity_rejects_nan():
    with pytest.raises(DataError):
        gb.cosine_similarity([[np.nan, 1.0]])


def test_sparsify_threshold_is_inclusive_and_drops_self_loops():
    W = np.array([[1.0, 0.5, 0.49], [0.5, 1.0, 0.8], [0.49, 0.8, 1.0]])
    g = gb.sparsify(W, 0.5)
    assert sorted((i, j) for i, j, _ in g.edges) == [(0, 1), (1, 2)]
    np.testing.assert_allclose(g.degrees, [0.5, 1.3, 0.8])
    assert g.total_weight == pytest.approx(2.6)
    np.testing.assert_array_equal(g.dense(), g.dense().T)


def test_sparsify_alpha_zero_drops_zero_and_negative_weights():
    W = np.array([[1.0, 0.0, -0.2], [0.0, 1.0, 0.3], [-0.2, 0.3, 1.0]])
    with pytest.warns(RuntimeWarning, match="isolated"):
        g = gb.sparsify(W, 0.0)
    assert g.num_edges == 1


def test_sparsify_errors():
    with pytest.raises(ConfigError):
        gb.sparsify(np.eye(3), 1.5)
    with pytest.raises(DegenerateError):
        gb.sparsify(np.eye(3), 0.5)
    with pytest.raises(DataError):
        gb.sparsify(np.array([[1.0, 0.9], [0.1, 1.0]]), 0.5)


def test_isolated_node_warns():
    W = np.array([[1.0, 0.9, 0.0], [0.9, 1.0, 0.0], [0.0, 0.0, 1.0]])
    with pytest.warns(RuntimeWarning, match="isolated"):
        g = gb.sparsify(W, 0.5)
    assert g.isolated.tolist() == [2]


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.0, 1.0), st.floats(0.0, 1.0))
def test_edge_count_monotone_in_alpha(seed, a1, a2):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((12, 4))
    W = gb.cosine_similarity(X)
    lo, hi = sorted((a1, a2))
    counts = []
    for a in (lo, hi):
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", RuntimeWarning)
                counts.append(gb.sparsify(W, a).num_edges)
        except DegenerateError:
            counts.append(0)
    assert counts[0] >= counts[1]


def test_sparse_modularity_matches_dense_oracle(rng):
    for _ in range(20):
        n, k = int(rng.integers(3, 30)), int(rng.integers(2, 5))
        g = random_graph(rng, n)
        S = random_stochastic(rng, n, k)
        for conv in ("newman", "halved-null"):
            B = gb.modularity_matrix(g, conv)
            assert abs(gb.modularity_quadratic(g, S, conv).item() - np.trace(S.T @ B @ S)) < 1e-9


def test_modularity_matrix_rows_sum_to_zero(rng):
    g = random_graph(rng, 15)
    np.testing.assert_allclose(gb.modularity_matrix(g).sum(axis=1), 0.0, atol=1e-12)


def test_normalized_adjacency_spectrum(rng):
    g = random_graph(rng, 20, density=0.5)
    for loops in (False, True):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            L = gb.normalized_adjacency(g, loops).toarray()
        np.testing.assert_allclose(L, L.T, atol=1e-15)
        ev = np.linalg.eigvalsh(L)
        assert ev.min() >= -1 - 1e-12 and ev.max() <= 1 + 1e-12


def test_normalized_adjacency_entries():
    g = gb.sparsify(np.array([[1.0, 0.5, 0.0], [0.5, 1.0, 1.0], [0.0, 1.0, 1.0]]), 0.1)
    L = gb.normalized_adjacency(g).toarray()
    d = np.array([0.5, 1.5, 1.0])
    np.testing.assert_allclose(L, g.dense() / np.sqrt(np.outer(d, d)), atol=1e-15)


def test_edgelist_round_trip(tmp_path, rng):
    g = random_graph(rng, 10)
    path = tmp_path / "g.tsv"
    gb.write_edgelist(g, path)
    h = gb.read_edgelist(path)
    assert h.n == g.n and h.alpha == g.alpha
    np.testing.assert_array_equal(h.dense(), g.dense())


def test_edgelist_bad_header(tmp_path):
    p = tmp_path / "bad.tsv"
    p.write_text("0\t1\t0.5\n")
    with pytest.raises(FormatError):
        gb.read_edgelist(p)


def test_edgeless_graph_with_self_loops_is_identity():
    g = gb.SubjectGraph(3, np.array([], int), np.array([], int), np.array([]), alpha=0.5)
    np.testing.assert_array_equal(gb.normalized_adjacency(g, self_loops=True).toarray(), np.eye(3))


def test_single_unit_edge_operator():
    g = gb.sparsify(np.array([[1.0, 1.0], [1.0, 1.0]]), 0.5)
    np.testing.assert_array_equal(gb.normalized_adjacency(g).toarray(), [[0.0, 1.0], [1.0, 0.0]])
