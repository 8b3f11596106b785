import numpy as np

from .BaseGraph import Graph
from ..exceptions import ValidationError


class WeightedGraph(Graph):
    """
    A dense, symmetric weighted graph with weights in [0, 1].

    Carries condensed adjacencies and sampled subgraphs through evaluation.
    """

    is_weighted = True

    def __init__(self, weights, name=""):
        self.weights = np.array(weights, dtype=np.float64)
        self.name = name
        self.num_nodes = self.weights.shape[0] if self.weights.ndim == 2 else 0
        self.validate()
        self.weights.setflags(write=False)

    def validate(self):
        w = self.weights
        if w.ndim != 2 or w.shape[0] != w.shape[1] or w.shape[0] == 0:
            raise ValidationError(f"Weights must be a non-empty square matrix, got shape {w.shape}")
        if not np.all(np.isfinite(w)):
            raise ValidationError("Weights contain non-finite values")
        if not np.array_equal(w, w.T):
            raise ValidationError("Weights are not exactly symmetric")
        if np.any(np.diag(w) != 0.0):
            raise ValidationError("Weights have a non-zero diagonal")
        if w.min() < 0.0 or w.max() > 1.0:
            raise ValidationError("Weights must lie in [0, 1]")

    def adjacency_matrix(self):
        return self.weights

    def count_edges(self, threshold=0.5):
        upper = np.triu(self.weights, k=1)
        return int(np.count_nonzero(upper > threshold))

    def edge_list(self, threshold=0.0):
        """Returns (u, v, weight) for u < v with weight above ``threshold``."""
        rows, cols = np.nonzero(np.triu(self.weights, k=1) > threshold)
        return [(int(u), int(v), float(self.weights[u, v])) for u, v in zip(rows, cols)]


class SynthAdjacency(WeightedGraph):
    """The synthetic adjacency A' produced by the hyperbolic structure network."""

    def __init__(self, weights, name="synthetic"):
        super().__init__(weights, name=name)
