import numpy as np
import scipy.sparse as sp

from ..graphs import CondensedGraph, GraphBundle, normalize_matrix
from ..numerics import Tensor, ops


def glorot(rng, fan_in, fan_out):
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=(fan_in, fan_out))


def propagation_matrix(graph):
    """
    The GCN propagation D~^-1/2 (A + I) D~^-1/2.

    Sparse for bundles, dense (weighted) for condensed graphs.
    """
    if isinstance(graph, CondensedGraph):
        return normalize_matrix(graph.adjacency_matrix(), add_self_loops=True)
    if isinstance(graph, GraphBundle):
        return normalize_matrix(graph.adjacency, add_self_loops=True)
    return normalize_matrix(graph.adjacency_matrix(), add_self_loops=True)


def propagate(matrix, tensor):
    if sp.issparse(matrix):
        return ops.sparse_matmul(matrix, tensor)
    return ops.matmul(matrix, tensor)


class Gcn:
    """
    Two graph-convolution layers: S relu(S X W1 + b1) W2 + b2.

    Attributes:
        params (dict): W1, b1, W2, b2 as numpy arrays.
    """

    def __init__(self, in_features, hidden, out_features, rng):
        self.in_features = int(in_features)
        self.hidden = int(hidden)
        self.out_features = int(out_features)
        self.params = {
            "W1": glorot(rng, self.in_features, self.hidden),
            "b1": np.zeros(self.hidden),
            "W2": glorot(rng, self.hidden, self.out_features),
            "b2": np.zeros(self.out_features),
        }

    def forward(self, matrix, propagated_features, params=None):
        """
        Args:
            matrix: Propagation matrix S (sparse or dense).
            propagated_features (np.ndarray): S X, precomputed since X is fixed.
            params (dict, optional): Tape variables; defaults to constants.

        Returns:
            Tensor: (n, out_features) output.
        """
        params = params if params is not None else {k: Tensor(v) for k, v in self.params.items()}
        hidden = ops.relu(ops.add(ops.matmul(propagated_features, params["W1"]), params["b1"]))
        return ops.add(propagate(matrix, ops.matmul(hidden, params["W2"])), params["b2"])

    def output(self, graph):
        """Forward pass over ``graph`` with its own features, as a numpy array."""
        matrix = propagation_matrix(graph)
        features = np.asarray(graph.features, dtype=np.float64)
        return self.forward(matrix, np.asarray(matrix @ features)).value
