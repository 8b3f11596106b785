from .BaseGraph import Graph, normalize_matrix
from .WeightedGraph import WeightedGraph, SynthAdjacency
from .GraphBundle import GraphBundle, normalized_adjacency, class_distribution, induced_subgraph
from .CondensedGraph import CondensedGraph
