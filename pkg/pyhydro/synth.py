import logging

import networkx as nx
import numpy as np

from .exceptions import ConfigurationError
from .graphs import GraphBundle
from .helper import Split
from .numerics import Rng

log = logging.getLogger(__name__)

SPLIT_RATIOS = (0.8, 0.1, 0.1)


def class_features(labels, num_features, generator, separation=1.0, noise=1.0):
    """Gaussian features around one random center per class, as float32."""
    num_classes = int(labels.max()) + 1
    centers = generator.normal(0.0, separation, size=(num_classes, num_features))
    features = centers[labels] + generator.normal(0.0, noise, size=(labels.size, num_features))
    return features.astype(np.float32)


def stratified_split(labels, generator, ratios=SPLIT_RATIOS):
    """
    Per-class train/val/test split; every class keeps at least one train node.
    """
    train, val, test = [], [], []
    for cls in range(int(labels.max()) + 1):
        nodes = generator.permutation(np.flatnonzero(labels == cls))
        n_train = max(1, int(round(ratios[0] * nodes.size)))
        n_val = min(int(round(ratios[1] * nodes.size)), nodes.size - n_train)
        train.append(nodes[:n_train])
        val.append(nodes[n_train:n_train + n_val])
        test.append(nodes[n_train + n_val:])
    return Split(*(np.sort(np.concatenate(part)) for part in (train, val, test)))


def _bundle(graph, labels, num_features, rng, name, ratios):
    edges = np.array(sorted(graph.edges()), dtype=np.int64).reshape(-1, 2)
    features = class_features(labels, num_features, rng.stream("synth/features"))
    split = stratified_split(labels, rng.stream("synth/split"), ratios)
    bundle = GraphBundle.from_edges(labels.size, edges, features, labels, split, name=name)
    log.info(f"Generated {name}: {bundle.num_nodes} nodes, {bundle.num_edges} edges, {bundle.num_classes} classes")
    return bundle


def sbm_bundle(sizes, p_in, p_out, num_features=32, seed=0, name="sbm", ratios=SPLIT_RATIOS):
    """
    A stochastic block model bundle whose classes are the blocks.

    Args:
        sizes (list): Block sizes.
        p_in (float): Edge probability inside a block.
        p_out (float): Edge probability across blocks.
        num_features (int): Feature dimension.
        seed (int): Generator seed.

    Returns:
        GraphBundle
    """
    if not sizes or min(sizes) < 1:
        raise ConfigurationError(f"Block sizes must be positive, got {sizes}")
    if not (0 <= p_in <= 1 and 0 <= p_out <= 1):
        raise ConfigurationError(f"Edge probabilities must lie in [0, 1], got {p_in} and {p_out}")
    rng = Rng(seed)
    probs = [[p_in if i == j else p_out for j in range(len(sizes))] for i in range(len(sizes))]
    graph_seed = int(rng.stream("synth/graph").integers(0, 2**31 - 1))
    graph = nx.stochastic_block_model(sizes, probs, seed=graph_seed)
    labels = np.repeat(np.arange(len(sizes)), sizes).astype(np.int64)
    return _bundle(graph, labels, num_features, rng, name, ratios)


def expected_sbm_edges(sizes, p_in, p_out):
    sizes = np.asarray(sizes, dtype=np.float64)
    inside = np.sum(sizes * (sizes - 1) / 2.0)
    across = (sizes.sum() ** 2 - np.sum(sizes**2)) / 2.0
    return float(p_in * inside + p_out * across)


def ba_bundle(num_nodes, m, num_classes=2, num_features=32, seed=0, name="ba", ratios=SPLIT_RATIOS):
    """
    A Barabasi-Albert preferential-attachment bundle.

    Classes are contiguous ranges of node ids, so older (higher degree) nodes
    share a class. For m >= 3 growth starts from an m-cycle, giving
    m + m * (num_nodes - m) edges; smaller m starts from a star on m + 1 nodes.
    """
    if not 1 <= m < num_nodes:
        raise ConfigurationError(f"Barabasi-Albert needs 1 <= m < n, got m={m}, n={num_nodes}")
    if not 1 <= num_classes <= num_nodes:
        raise ConfigurationError(f"num_classes must lie in [1, {num_nodes}], got {num_classes}")
    rng = Rng(seed)
    graph_seed = int(rng.stream("synth/graph").integers(0, 2**31 - 1))
    initial = nx.cycle_graph(m) if m >= 3 else None
    graph = nx.barabasi_albert_graph(num_nodes, m, seed=graph_seed, initial_graph=initial)
    labels = (np.arange(num_nodes) * num_classes // num_nodes).astype(np.int64)
    return _bundle(graph, labels, num_features, rng, name, ratios)


def expected_ba_edges(num_nodes, m):
    if m >= 3:
        return m + m * (num_nodes - m)
    return m * (num_nodes - m)
