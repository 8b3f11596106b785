import numpy as np
import pytest

from pyhydro.graphs import CondensedGraph, GraphBundle
from pyhydro.helper import Split
from pyhydro.synth import sbm_bundle


def make_bundle(num_nodes, edges, labels=None, num_features=4, seed=0, train=None, name="toy"):
    labels = np.zeros(num_nodes, dtype=np.int64) if labels is None else np.asarray(labels, dtype=np.int64)
    features = np.random.default_rng(seed).normal(size=(num_nodes, num_features)).astype(np.float32)
    split = Split(np.arange(num_nodes) if train is None else train)
    return GraphBundle.from_edges(num_nodes, edges, features, labels, split, name=name)


def dense_condensed(num_nodes, num_edges, num_features=3, num_classes=2, high=0.9, low=0.1):
    """A condensed graph whose first ``num_edges`` upper-triangle pairs weigh ``high``."""
    rows, cols = np.triu_indices(num_nodes, k=1)
    weights = np.zeros((num_nodes, num_nodes))
    weights[rows, cols] = low
    weights[rows[:num_edges], cols[:num_edges]] = high
    weights = weights + weights.T
    labels = np.arange(num_nodes) % num_classes
    features = np.random.default_rng(0).normal(size=(num_nodes, num_features))
    return CondensedGraph(weights, features, labels, num_classes, {"dataset": "dense"}, name="dense")


@pytest.fixture
def bundle_factory():
    return make_bundle


@pytest.fixture
def condensed_factory():
    return dense_condensed


@pytest.fixture
def path3():
    return make_bundle(3, [(0, 1), (1, 2)], name="P3")


@pytest.fixture
def triangle():
    return make_bundle(3, [(0, 1), (1, 2), (0, 2)], name="K3")


@pytest.fixture
def two_edges():
    return make_bundle(4, [(0, 1), (2, 3)], name="2K2")


@pytest.fixture
def small_sbm():
    return sbm_bundle([30, 30, 30], 0.3, 0.02, num_features=8, seed=3, name="small-sbm")
