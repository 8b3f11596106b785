import logging
import time

import numpy as np

from .linkpred import train_lp
from ..adapters import Adapter
from ..graphs import CondensedGraph, GraphBundle
from ..helper import EfficiencyReport, GraphStats, sig6

log = logging.getLogger(__name__)

FLOAT32_BYTES = 4
INDEX_BYTES = 8


def stats(graph, threshold=0.5):
    """
    Node count, edge count and density.

    Binary graphs count their edges; weighted graphs count pairs with weight
    above ``threshold``.

    Returns:
        GraphStats
    """
    return GraphStats(graph.num_nodes, graph.count_edges(threshold))


def serialized_bytes(graph):
    """Size of the on-disk form of ``graph`` when no artifact directory exists."""
    if isinstance(graph, CondensedGraph):
        b = graph.num_nodes
        return b * b * FLOAT32_BYTES + b * graph.num_features * FLOAT32_BYTES + b * INDEX_BYTES
    if isinstance(graph, GraphBundle):
        return (
            2 * graph.num_edges * INDEX_BYTES
            + graph.num_nodes * graph.num_features * FLOAT32_BYTES
            + graph.num_nodes * INDEX_BYTES
        )
    n = graph.num_nodes
    return n * n * FLOAT32_BYTES


def measure_efficiency(graph, split=None, epochs=1000, hidden=128, lr=0.001, seed=0, repeats=1,
                       artifact_path=None, edge_threshold=0.5):
    """
    Times link-prediction training on ``graph`` and measures its storage size.

    Args:
        graph (GraphBundle or CondensedGraph): Graph to train on.
        split (EdgeSplit, optional): Needed for original graphs.
        epochs (int): Training epochs of the timed run.
        repeats (int): Timed runs; the median is reported.
        artifact_path (path, optional): Directory or file whose size is reported;
            the serialized size is computed otherwise.

    Returns:
        EfficiencyReport
    """
    timings = []
    for run in range(repeats):
        start = time.perf_counter()
        train_lp(graph, split, seed=seed + run, epochs=epochs, hidden=hidden, lr=lr, edge_threshold=edge_threshold)
        timings.append(time.perf_counter() - start)
    size = Adapter(artifact_path).size_bytes() if artifact_path is not None else serialized_bytes(graph)
    report = EfficiencyReport(float(np.median(timings)), size, epochs, timings)
    log.info(f"{graph.name or 'graph'}: {report.seconds:.3f}s for {epochs} epochs, {size} bytes")
    return report


def compare_efficiency(original, condensed):
    """Speed-up and storage ratio of a condensed graph over the original."""
    return {
        "original": original.to_dict(),
        "condensed": condensed.to_dict(),
        "speedup": sig6(original.seconds / condensed.seconds) if condensed.seconds > 0 else None,
        "storage_ratio": sig6(original.artifact_bytes / condensed.artifact_bytes) if condensed.artifact_bytes else None,
    }
