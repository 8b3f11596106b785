import numpy as np
import pytest

from pyhydro.adapters import export_dot, load_bundle, load_condensed, read_dot_edges, save_bundle, save_condensed
from pyhydro.exceptions import BundleLoadError, ValidationError
from pyhydro.graphs import CondensedGraph, WeightedGraph, induced_subgraph, normalized_adjacency
from pyhydro.hyperbolic import HyperbolicStructureNet


def test_from_edges_symmetrizes_and_deduplicates(bundle_factory):
    g = bundle_factory(4, [(1, 0), (0, 1), (2, 2), (2, 3), (3, 2)])

    assert g.num_edges == 2
    assert g.edge_array().tolist() == [[0, 1], [2, 3]]
    assert (g.adjacency != g.adjacency.T).nnz == 0
    assert g.adjacency.diagonal().sum() == 0


def test_from_edges_rejects_out_of_range_endpoint(bundle_factory):
    with pytest.raises(ValidationError, match="outside"):
        bundle_factory(3, [(0, 3)])


def test_bundle_is_read_only(path3):
    with pytest.raises(ValueError):
        path3.features[0, 0] = 1.0


def test_missing_class_is_rejected(bundle_factory):
    with pytest.raises(ValidationError, match="no nodes"):
        bundle_factory(3, [(0, 1)], labels=[0, 0, 2])


def test_normalized_adjacency_of_triangle_with_self_loops(triangle):
    normalized = normalized_adjacency(triangle, add_self_loops=True).toarray()

    np.testing.assert_allclose(normalized, np.full((3, 3), 1.0 / 3.0))


def test_normalized_adjacency_keeps_isolated_rows_zero(bundle_factory):
    g = bundle_factory(3, [(0, 1)])

    normalized = normalized_adjacency(g).toarray()

    assert not normalized[2].any()
    np.testing.assert_allclose(normalized[0, 1], 1.0)


def test_induced_subgraph_keeps_node_order(path3):
    sub = induced_subgraph(path3, [2, 1])

    assert isinstance(sub, WeightedGraph)
    np.testing.assert_array_equal(sub.weights, [[0.0, 1.0], [1.0, 0.0]])


def test_weighted_graph_rejects_asymmetric_weights():
    with pytest.raises(ValidationError, match="symmetric"):
        WeightedGraph([[0.0, 0.2], [0.3, 0.0]])


def test_weighted_graph_rejects_self_loops():
    with pytest.raises(ValidationError, match="diagonal"):
        WeightedGraph([[0.5, 0.2], [0.2, 0.0]])


def test_dense_condensed_density_rounds_to_two_decimals(condensed_factory):
    condensed = condensed_factory(55, 1431)

    stats = condensed.stats(threshold=0.5).to_dict()

    assert stats["edges"] == 1431
    assert stats["density_percent"] == "96.36%"


def test_condensed_graph_requires_matching_labels():
    with pytest.raises(ValidationError):
        CondensedGraph(np.zeros((3, 3)), np.zeros((3, 2)), [0, 1], 2)


def test_bundle_round_trip(tmp_path, small_sbm):
    save_bundle(small_sbm, tmp_path / "bundle")

    loaded = load_bundle(tmp_path / "bundle")

    np.testing.assert_array_equal(loaded.edge_array(), small_sbm.edge_array())
    np.testing.assert_array_equal(loaded.features, small_sbm.features)
    np.testing.assert_array_equal(loaded.labels, small_sbm.labels)
    np.testing.assert_array_equal(loaded.split.train_idx, small_sbm.split.train_idx)
    assert loaded.name == small_sbm.name


def test_missing_labels_file_names_the_file(tmp_path, path3):
    save_bundle(path3, tmp_path / "bundle")
    (tmp_path / "bundle" / "labels.tsv").unlink()

    with pytest.raises(BundleLoadError, match="labels.tsv"):
        load_bundle(tmp_path / "bundle")


def test_truncated_features_are_rejected(tmp_path, path3):
    save_bundle(path3, tmp_path / "bundle")
    path = tmp_path / "bundle" / "features.f32"
    path.write_bytes(path.read_bytes()[:-4])

    with pytest.raises(ValidationError, match="features.f32"):
        load_bundle(tmp_path / "bundle")


def test_condensed_artifact_round_trip(tmp_path):
    rng = np.random.default_rng(1)
    weights = rng.uniform(size=(5, 5))
    weights = (weights + weights.T) / 2.0
    np.fill_diagonal(weights, 0.0)
    condensed = CondensedGraph(weights, rng.normal(size=(5, 3)), [0, 0, 1, 1, 1], 2, {"seed": 4}, name="toy")
    condensed.net = HyperbolicStructureNet(3, hidden_units=4, num_layers=1, rng=rng)

    save_condensed(condensed, tmp_path / "out")
    loaded = load_condensed(tmp_path / "out")

    assert (tmp_path / "out" / "condensed" / "adj.f32").stat().st_size == 5 * 5 * 4
    np.testing.assert_allclose(loaded.adjacency_matrix(), weights, rtol=1e-6)
    np.testing.assert_allclose(loaded.features, condensed.features, rtol=1e-6)
    np.testing.assert_array_equal(loaded.labels, condensed.labels)
    assert loaded.provenance == {"seed": 4}
    for name, value in condensed.net.params.items():
        np.testing.assert_allclose(loaded.net.params[name], value, rtol=1e-6)


def test_dot_export_parses_back(tmp_path, condensed_factory):
    condensed = condensed_factory(6, 4, high=0.75, low=0.2)

    export_dot(condensed, tmp_path / "g.dot", threshold=0.5)
    edges = read_dot_edges(tmp_path / "g.dot")

    assert [(u, v) for u, v, _ in edges] == [(u, v) for u, v, _ in condensed.adjacency.edge_list(0.5)]
    assert all(w == pytest.approx(0.75) for _, _, w in edges)
    text = (tmp_path / "g.dot").read_text()
    assert '0 [label="0:0"]' in text
    assert "penwidth=" in text


@pytest.mark.parametrize("add_self_loops", [False, True])
def test_normalized_adjacency_is_symmetric_with_unit_spectral_radius(small_sbm, add_self_loops):
    normalized = normalized_adjacency(small_sbm, add_self_loops=add_self_loops).toarray()

    np.testing.assert_allclose(normalized, normalized.T, atol=1e-12)
    x = np.random.default_rng(0).normal(size=small_sbm.num_nodes)
    for _ in range(200):
        y = normalized @ x
        assert np.linalg.norm(y) <= (1.0 + 1e-9) * np.linalg.norm(x)
        x = y / np.linalg.norm(y)
    assert np.abs(np.linalg.eigvalsh(normalized)).max() <= 1.0 + 1e-9
