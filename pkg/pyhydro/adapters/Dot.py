import logging
import re

import numpy as np
import scipy.sparse as sp

from .BaseAdapter import Adapter
from ..exceptions import BundleLoadError

log = logging.getLogger(__name__)

EDGE_PATTERN = re.compile(r"^\s*(\d+)\s*--\s*(\d+)\s*\[weight=([0-9.eE+-]+)")


class DotFile(Adapter):
    """
    Graphviz export of a weighted graph.

    Edge pen-width grows linearly with the weight, so heavier links draw
    thicker. Pairs at or below ``threshold`` are omitted. Nodes and edges are
    written in ascending id order.
    """

    def __init__(self, path, threshold=0.0, min_penwidth=0.5, max_penwidth=5.0):
        super().__init__(path)
        self.threshold = threshold
        self.min_penwidth = min_penwidth
        self.max_penwidth = max_penwidth

    def penwidth(self, weight):
        return self.min_penwidth + (self.max_penwidth - self.min_penwidth) * weight

    def write(self, graph):
        matrix = graph.adjacency_matrix()
        weights = matrix.toarray() if sp.issparse(matrix) else np.asarray(matrix)
        labels = getattr(graph, "labels", None)
        lines = [f"graph {_identifier(graph.name or 'condensed')} {{", "  node [shape=circle];"]
        for node in range(graph.num_nodes):
            label = f"{node}" if labels is None else f"{node}:{int(labels[node])}"
            lines.append(f'  {node} [label="{label}"];')
        rows, cols = np.nonzero(np.triu(weights, k=1) > self.threshold)
        for u, v in zip(rows, cols):
            w = float(weights[u, v])
            lines.append(f"  {u} -- {v} [weight={w:.6g}, penwidth={self.penwidth(w):.4f}];")
        lines.append("}")
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self.path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        log.info(f"Exported {rows.size} edges to {self.path}")
        return self.path

    def read(self):
        """Parses the edges back as (u, v, weight) tuples."""
        if not self.path.is_file():
            raise BundleLoadError(f"Missing file {self.path}")
        edges = []
        for line in self.path.read_text(encoding="utf-8").splitlines():
            match = EDGE_PATTERN.match(line)
            if match:
                edges.append((int(match.group(1)), int(match.group(2)), float(match.group(3))))
        return edges


def _identifier(name):
    return re.sub(r"\W", "_", name) or "condensed"


def export_dot(graph, path, threshold=0.0):
    return DotFile(path, threshold=threshold).write(graph)


def read_dot_edges(path):
    return DotFile(path).read()
