import logging

import numpy as np
import scipy.sparse as sp

from .BaseGraph import Graph, normalize_matrix
from .WeightedGraph import WeightedGraph
from ..exceptions import ValidationError

log = logging.getLogger(__name__)


def canonical_edges(edges, num_nodes):
    """
    Symmetrizes an edge list into sorted unique pairs (u < v) without self-loops.

    Raises:
        ValidationError: If an endpoint is outside [0, num_nodes).
    """
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    if edges.size and (edges.min() < 0 or edges.max() >= num_nodes):
        bad = edges[(edges < 0).any(axis=1) | (edges >= num_nodes).any(axis=1)][0]
        raise ValidationError(f"Edge ({bad[0]}, {bad[1]}) is outside [0, {num_nodes})")
    edges = edges[edges[:, 0] != edges[:, 1]]
    edges = np.sort(edges, axis=1)
    if edges.size == 0:
        return np.zeros((0, 2), dtype=np.int64)
    return np.unique(edges, axis=0)


class GraphBundle(Graph):
    """
    An attributed original graph G = (A, X, Y) with its node split.

    The bundle is immutable after construction: the adjacency, features and
    labels are validated once and their buffers are marked read-only.

    Attributes:
        num_nodes (int): Number of nodes n.
        num_features (int): Feature dimension.
        num_classes (int): Number of classes.
        adjacency (scipy.sparse.csr_matrix): Symmetric 0/1 adjacency, zero diagonal.
        features (np.ndarray): float32 feature matrix (n x num_features).
        labels (np.ndarray): int64 labels in [0, num_classes).
        split (Split): Train/val/test node indices.
    """

    def __init__(self, adjacency, features, labels, split, num_classes=None, name=""):
        self.adjacency = sp.csr_matrix(adjacency, dtype=np.float64, copy=True)
        self.adjacency.sort_indices()
        self.features = np.array(features, dtype=np.float32, order="C")
        self.labels = np.asarray(labels, dtype=np.int64)
        self.split = split
        self.name = name
        self.num_nodes = self.adjacency.shape[0]
        self.num_features = self.features.shape[1] if self.features.ndim == 2 else 0
        self.num_classes = int(num_classes) if num_classes is not None else int(self.labels.max()) + 1

        self.validate()
        for array in (self.features, self.labels, self.adjacency.data, self.adjacency.indices, self.adjacency.indptr):
            array.setflags(write=False)

    @staticmethod
    def from_edges(num_nodes, edges, features, labels, split, num_classes=None, name=""):
        """
        Builds a bundle from an undirected (possibly directed or duplicated) edge list.

        Args:
            num_nodes (int): Number of nodes.
            edges (array-like): Pairs of 0-based node ids.
            features, labels, split: See GraphBundle.
            num_classes (int, optional): Defaults to max(label) + 1.
            name (str): Dataset name.

        Returns:
            GraphBundle: Symmetrized, self-loop free, deduplicated.
        """
        pairs = canonical_edges(edges, num_nodes)
        rows = np.concatenate([pairs[:, 0], pairs[:, 1]])
        cols = np.concatenate([pairs[:, 1], pairs[:, 0]])
        adjacency = sp.csr_matrix(
            (np.ones(rows.size), (rows, cols)), shape=(num_nodes, num_nodes), dtype=np.float64
        )
        return GraphBundle(adjacency, features, labels, split, num_classes=num_classes, name=name)

    def validate(self):
        n = self.num_nodes
        if n <= 0:
            raise ValidationError("Bundle has no nodes")
        if self.adjacency.shape != (n, n):
            raise ValidationError(f"Adjacency shape {self.adjacency.shape} is not square")
        if self.adjacency.nnz:
            if not np.all(self.adjacency.data == 1.0):
                raise ValidationError("Adjacency entries must be 0 or 1")
            if self.adjacency.diagonal().any():
                raise ValidationError("Adjacency has self-loops")
            if (self.adjacency != self.adjacency.T).nnz:
                raise ValidationError("Adjacency is not symmetric")
        if self.features.shape[0] != n or self.num_features <= 0:
            raise ValidationError(f"Feature block shape {self.features.shape} does not match {n} nodes")
        if not np.all(np.isfinite(self.features)):
            raise ValidationError("Features contain non-finite values")
        if self.labels.shape != (n,):
            raise ValidationError(f"Expected {n} labels, got {self.labels.shape[0]}")
        if self.labels.min() < 0 or self.labels.max() >= self.num_classes:
            raise ValidationError(f"Labels must lie in [0, {self.num_classes})")
        missing = np.flatnonzero(np.bincount(self.labels, minlength=self.num_classes) == 0)
        if missing.size:
            raise ValidationError(f"Class {int(missing[0])} has no nodes")
        self.split.validate(n)

    def adjacency_matrix(self):
        return self.adjacency

    def edge_array(self):
        """Returns the sorted upper-triangle edge list (u < v)."""
        upper = sp.triu(self.adjacency, k=1).tocoo()
        edges = np.stack([upper.row, upper.col], axis=1).astype(np.int64)
        order = np.lexsort((edges[:, 1], edges[:, 0]))
        return edges[order]

    def count_edges(self, threshold=0.5):
        return int(self.adjacency.nnz // 2)

    @property
    def num_edges(self):
        return self.count_edges()

    def with_edges(self, edges, name=None):
        """Returns a copy of the bundle that observes only ``edges``."""
        return GraphBundle.from_edges(
            self.num_nodes,
            edges,
            self.features,
            self.labels,
            self.split,
            num_classes=self.num_classes,
            name=self.name if name is None else name,
        )

    def class_distribution(self, indices):
        indices = np.asarray(indices, dtype=np.int64)
        return np.bincount(self.labels[indices], minlength=self.num_classes).astype(np.int64)

    def train_nodes_of_class(self, cls):
        train = self.split.train_idx
        return train[self.labels[train] == cls]


def normalized_adjacency(g, add_self_loops=False):
    """
    D~^-1/2 A~ D~^-1/2 with A~ = A + I when ``add_self_loops`` is set.

    Args:
        g (Graph): A GraphBundle (sparse result) or weighted graph (dense result).
        add_self_loops (bool): Whether to add the identity before normalizing.
    """
    return normalize_matrix(g.adjacency_matrix(), add_self_loops)


def class_distribution(g, indices):
    return g.class_distribution(indices)


def induced_subgraph(g, nodes):
    """
    The subgraph of ``g`` induced by ``nodes``, as a WeightedGraph in node order.
    """
    nodes = np.asarray(nodes, dtype=np.int64)
    sub = g.adjacency[nodes][:, nodes].toarray()
    np.fill_diagonal(sub, 0.0)
    return WeightedGraph(sub, name=f"{g.name}[induced]")
