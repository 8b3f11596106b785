import numpy as np

from .BaseGraph import Graph
from .WeightedGraph import SynthAdjacency
from ..exceptions import ValidationError
from ..helper import GraphStats


class CondensedGraph(Graph):
    """
    The synthetic triple G' = (A', X', Y') with its provenance.

    Attributes:
        adjacency (SynthAdjacency): Dense weighted adjacency A'.
        features (np.ndarray): Condensed features X' (budget x num_features).
        labels (np.ndarray): Fixed condensed labels Y'.
        num_classes (int): Number of classes of the original graph.
        provenance (dict): Config hash, seed, dataset name, selection method, ...
        history (pandas.DataFrame or None): Per-epoch losses of the producing run.
        net (HyperbolicStructureNet or None): The structure net that produced A'.
        selection (SelectionResult or None): The initial node selection.
    """

    is_weighted = True

    def __init__(self, adjacency, features, labels, num_classes, provenance=None, name=""):
        if not isinstance(adjacency, SynthAdjacency):
            adjacency = SynthAdjacency(adjacency)
        self.adjacency = adjacency
        self.features = np.array(features, dtype=np.float64)
        self.labels = np.asarray(labels, dtype=np.int64)
        self.num_classes = int(num_classes)
        self.provenance = dict(provenance or {})
        self.name = name or self.provenance.get("dataset", "")
        self.num_nodes = self.labels.size
        self.history = None
        self.net = None
        self.selection = None
        self.validate()

    @property
    def budget(self):
        return self.num_nodes

    @property
    def num_features(self):
        return self.features.shape[1]

    def validate(self):
        if self.adjacency.num_nodes != self.num_nodes:
            raise ValidationError(f"A' has {self.adjacency.num_nodes} nodes but Y' has {self.num_nodes} labels")
        if self.features.ndim != 2 or self.features.shape[0] != self.num_nodes:
            raise ValidationError(f"X' has shape {self.features.shape} for {self.num_nodes} nodes")
        if not np.all(np.isfinite(self.features)):
            raise ValidationError("X' contains non-finite values")
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= self.num_classes):
            raise ValidationError(f"Y' labels must lie in [0, {self.num_classes})")

    def class_histogram(self):
        return np.bincount(self.labels, minlength=self.num_classes).astype(np.int64)

    def adjacency_matrix(self):
        return self.adjacency.weights

    def to_weighted(self):
        return self.adjacency

    def count_edges(self, threshold=0.5):
        return self.adjacency.count_edges(threshold)

    def stats(self, threshold=0.5):
        return GraphStats(self.num_nodes, self.count_edges(threshold))
