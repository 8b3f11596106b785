import networkx as nx
import numpy as np
import pytest
from scipy.sparse.linalg import ArpackNoConvergence

from pyhydro.exceptions import ConfigurationError, DomainError, NumericalError
from pyhydro.graphs import GraphBundle, WeightedGraph
from pyhydro.helper import SpectralCache
from pyhydro.numerics import Rng
from pyhydro.spectral import (
    algebraic_jaccard_scores,
    laplacian,
    random_selection,
    select,
    select_nodes,
    smallest_eigenvectors,
    spectral_gap,
)


def random_graph(bundle_factory, n, p, seed, labels=None):
    # a spanning path keeps the graph connected, so the zero eigenvalue is simple
    graph = nx.gnp_random_graph(n, p, seed=seed)
    edges = list(graph.edges()) + [(i, i + 1) for i in range(n - 1)]
    return bundle_factory(n, edges, labels=labels)


def brute_force_mean_similarity(vectors, epsilon):
    norms = np.linalg.norm(vectors, axis=1)
    similarity = vectors @ vectors.T / (np.outer(norms, norms) + epsilon)
    return similarity.mean(axis=1)


def test_path_laplacian_eigenvalues(path3):
    cache = smallest_eigenvectors(laplacian(path3), 3)

    np.testing.assert_allclose(cache.eigenvalues, [0.0, 1.0, 3.0], atol=1e-10)


def test_triangle_laplacian_eigenvalues(triangle):
    cache = smallest_eigenvectors(laplacian(triangle), 3)

    np.testing.assert_allclose(cache.eigenvalues, [0.0, 3.0, 3.0], atol=1e-10)


def test_laplacian_rows_sum_to_zero(small_sbm):
    L = laplacian(small_sbm)

    np.testing.assert_allclose(np.asarray(L.sum(axis=1)).ravel(), 0.0, atol=1e-12)


@pytest.mark.parametrize("seed", range(10))
def test_lanczos_matches_dense_solver(bundle_factory, seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(60, 200))
    g = random_graph(bundle_factory, n, 0.08, seed)
    L = laplacian(g)

    cache = smallest_eigenvectors(L, 4, dense_threshold=0)

    np.testing.assert_allclose(cache.eigenvalues, np.linalg.eigvalsh(L.toarray())[:4], atol=1e-6)
    assert cache.residuals.max() < 1e-6 * max(abs(L).sum(axis=0).max(), 1.0)


def test_eigenvector_signs_are_fixed(small_sbm):
    vectors = smallest_eigenvectors(laplacian(small_sbm), 4).eigenvectors

    peaks = vectors[np.argmax(np.abs(vectors), axis=0), np.arange(vectors.shape[1])]
    assert np.all(peaks > 0)
    np.testing.assert_allclose(vectors.T @ vectors, np.eye(4), atol=1e-10)


def test_k_eig_out_of_range(path3):
    with pytest.raises(ConfigurationError):
        smallest_eigenvectors(laplacian(path3), 0)
    with pytest.raises(ConfigurationError):
        smallest_eigenvectors(laplacian(path3), 4)


def test_spectral_gap_of_reference_graphs(path3, triangle, two_edges):
    assert spectral_gap(triangle) == pytest.approx(1.5, abs=1e-12)
    assert spectral_gap(path3) == pytest.approx(1.0, abs=1e-12)
    assert spectral_gap(two_edges) == pytest.approx(0.0, abs=1e-12)


def test_spectral_gap_needs_two_nodes():
    with pytest.raises(DomainError):
        spectral_gap(WeightedGraph([[0.0]]))


def test_sparse_spectral_gap_matches_dense(bundle_factory):
    g = random_graph(bundle_factory, 150, 0.05, 7)

    assert spectral_gap(g, dense_threshold=10) == pytest.approx(spectral_gap(g), abs=1e-8)


def test_jaccard_scores_match_brute_force():
    vectors = np.random.default_rng(2).normal(size=(300, 5))
    cache = SpectralCache(np.zeros(5), vectors)

    scores = algebraic_jaccard_scores(cache, epsilon=1e-10, block_size=64)

    np.testing.assert_allclose(scores.mean_similarity, brute_force_mean_similarity(vectors, 1e-10), atol=1e-12)


def test_folded_scores_agree_with_exact_scores():
    vectors = np.random.default_rng(3).normal(size=(200, 4))
    cache = SpectralCache(np.zeros(4), vectors)

    exact = algebraic_jaccard_scores(cache, epsilon=1e-10)
    folded = algebraic_jaccard_scores(cache, epsilon=1e-10, fold_threshold=10)

    np.testing.assert_allclose(folded.mean_similarity, exact.mean_similarity, atol=1e-8)


def test_zero_rows_score_zero():
    vectors = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])

    scores = algebraic_jaccard_scores(SpectralCache(np.zeros(2), vectors))

    assert scores.mean_similarity[0] == 0.0
    assert scores.mean_similarity[1] == pytest.approx(1.0 / 3.0)


def test_select_nodes_breaks_ties_by_node_id(bundle_factory):
    g = bundle_factory(6, [(0, 1)], labels=[0, 1, 0, 1, 0, 1])
    scores = np.array([0.5, 0.1, 0.9, 0.1, 0.5, 0.3])

    result = select_nodes(g, scores, [2, 2])

    assert result.selected.tolist() == [2, 0, 5, 1]
    np.testing.assert_array_equal(result.init_features, g.features[[2, 0, 5, 1]])


def test_full_budget_selects_every_train_node(small_sbm):
    budget = small_sbm.class_distribution(small_sbm.split.train_idx)

    result = select(small_sbm, budget)

    assert sorted(result.selected.tolist()) == small_sbm.split.train_idx.tolist()


def test_infeasible_budget_names_the_class(bundle_factory):
    g = bundle_factory(4, [(0, 1)], labels=[0, 0, 0, 1])

    with pytest.raises(ConfigurationError, match="Class 1"):
        select_nodes(g, np.zeros(4), [1, 2])


def test_selection_matches_brute_force_reference(bundle_factory):
    labels = np.arange(200) % 2
    g = random_graph(bundle_factory, 200, 0.05, 11, labels=labels)

    result = select(g, [3, 3], k_eig=3)

    L = laplacian(g).toarray()
    values, vectors = np.linalg.eigh(L)
    reference = brute_force_mean_similarity(vectors[:, :3], 1e-10)
    expected = []
    for cls in range(2):
        nodes = np.flatnonzero(labels == cls)
        expected.extend(sorted(nodes, key=lambda i: (-reference[i], i))[:3])
    assert result.selected.tolist() == expected


def test_random_selection_is_seeded(small_sbm):
    first = random_selection(small_sbm, [2, 2, 2], Rng(5))
    second = random_selection(small_sbm, [2, 2, 2], Rng(5))

    np.testing.assert_array_equal(first.selected, second.selected)
    assert first.method == "random"
    np.testing.assert_array_equal(small_sbm.labels[first.selected], [0, 0, 1, 1, 2, 2])


def test_lanczos_failure_is_a_numerical_error(bundle_factory, monkeypatch):
    g = random_graph(bundle_factory, 60, 0.1, 3)

    def no_convergence(*args, **kwargs):
        raise ArpackNoConvergence("ARPACK error -1: No convergence", np.zeros(0), np.zeros((60, 0)))

    monkeypatch.setattr("pyhydro.spectral.eigsh", no_convergence)

    with pytest.raises(NumericalError, match="did not converge"):
        spectral_gap(g, dense_threshold=10)


def test_spectral_gap_ignores_node_order(bundle_factory):
    g = random_graph(bundle_factory, 40, 0.1, 5)
    order = np.random.default_rng(6).permutation(40)
    relabel = np.argsort(order)
    permuted = bundle_factory(40, relabel[g.edge_array()].tolist())

    assert spectral_gap(permuted) == pytest.approx(spectral_gap(g), abs=1e-10)


def test_selection_ignores_feature_scale(bundle_factory):
    labels = np.arange(120) % 3
    g = random_graph(bundle_factory, 120, 0.06, 9, labels=labels)
    scaled = GraphBundle.from_edges(120, g.edge_array(), 10.0 * np.asarray(g.features), labels, g.split)

    first = select(g, [2, 2, 2], k_eig=3)
    second = select(scaled, [2, 2, 2], k_eig=3)

    np.testing.assert_array_equal(first.selected, second.selected)
    np.testing.assert_allclose(second.init_features, 10.0 * first.init_features, rtol=1e-6)
