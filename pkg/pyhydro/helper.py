import asyncio
from enum import Enum

import numpy as np

from .exceptions import ValidationError


def sig6(value):
    """Rounds a float to 6 significant digits for JSON reports."""
    if value is None:
        return None
    return float(f"{float(value):.6g}")


def format_percent(value, digits=2):
    return f"{100.0 * value:.{digits}f}%"


class Split:
    train_idx: np.ndarray
    val_idx: np.ndarray
    test_idx: np.ndarray

    def __init__(self, train_idx, val_idx=None, test_idx=None):
        self.train_idx = np.asarray(train_idx, dtype=np.int64)
        self.val_idx = np.asarray(val_idx if val_idx is not None else [], dtype=np.int64)
        self.test_idx = np.asarray(test_idx if test_idx is not None else [], dtype=np.int64)

    def validate(self, num_nodes):
        parts = {"train": self.train_idx, "val": self.val_idx, "test": self.test_idx}
        if self.train_idx.size == 0:
            raise ValidationError("Split has an empty train partition")
        seen = np.zeros(num_nodes, dtype=bool)
        for name, idx in parts.items():
            if idx.size and (idx.min() < 0 or idx.max() >= num_nodes):
                raise ValidationError(f"Split '{name}' has an index outside [0, {num_nodes})")
            if np.unique(idx).size != idx.size:
                raise ValidationError(f"Split '{name}' repeats an index")
            if np.any(seen[idx]):
                raise ValidationError(f"Split '{name}' overlaps another partition")
            seen[idx] = True

    def to_dict(self):
        return {
            "train": self.train_idx.tolist(),
            "val": self.val_idx.tolist(),
            "test": self.test_idx.tolist(),
        }


class SpectralSource(Enum):
    UNNORMALIZED_LAPLACIAN = "unnormalized-laplacian"
    NORMALIZED_ADJACENCY = "normalized-adjacency"


class SpectralCache:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    source: SpectralSource

    def __init__(self, eigenvalues, eigenvectors, source=SpectralSource.UNNORMALIZED_LAPLACIAN, residuals=None):
        self.eigenvalues = eigenvalues
        self.eigenvectors = eigenvectors
        self.source = source
        self.residuals = residuals

    @property
    def k_eig(self):
        return self.eigenvalues.size


class SimilarityScores:
    mean_similarity: np.ndarray
    epsilon: float

    def __init__(self, mean_similarity, epsilon=1e-10):
        self.mean_similarity = mean_similarity
        self.epsilon = epsilon

    def summary(self, indices=None):
        values = self.mean_similarity if indices is None else self.mean_similarity[indices]
        if values.size == 0:
            return {"min": None, "max": None, "mean": None, "std": None}
        return {
            "min": sig6(values.min()),
            "max": sig6(values.max()),
            "mean": sig6(values.mean()),
            "std": sig6(values.std()),
        }


class SelectionResult:
    selected: np.ndarray
    per_class_budget: np.ndarray
    init_features: np.ndarray

    def __init__(self, selected, per_class_budget, init_features, method="jaccard", scores=None):
        self.selected = np.asarray(selected, dtype=np.int64)
        self.per_class_budget = np.asarray(per_class_budget, dtype=np.int64)
        self.init_features = init_features
        self.method = method
        self.scores = scores

    def to_dict(self):
        data = {
            "method": self.method,
            "selected": self.selected.tolist(),
            "per_class_budget": self.per_class_budget.tolist(),
        }
        if self.scores is not None:
            data["mean_similarity_stats"] = {
                "all": self.scores.summary(),
                "selected": self.scores.summary(self.selected),
            }
        return data


class GraphStats:
    num_nodes: int
    num_edges: int
    density: float

    def __init__(self, num_nodes, num_edges):
        self.num_nodes = int(num_nodes)
        self.num_edges = int(num_edges)
        pairs = self.num_nodes * (self.num_nodes - 1) / 2
        self.density = self.num_edges / pairs if pairs > 0 else 0.0

    def to_dict(self):
        return {
            "nodes": self.num_nodes,
            "edges": self.num_edges,
            "density": sig6(self.density),
            "density_percent": format_percent(self.density),
        }


class MetricReport:
    """
    Per-run values of one metric with their mean and standard deviation.

    Used for link-prediction F1 as well as MIA accuracy and LMIA F1.
    """

    metric: str
    values: list
    mean: float
    std: float

    def __init__(self, metric, values, task=None):
        self.metric = metric
        self.values = [float(v) for v in values]
        self.task = task
        self.mean = float(np.mean(self.values)) if self.values else 0.0
        self.std = float(np.std(self.values)) if self.values else 0.0

    def format(self):
        return f"{100.0 * self.mean:.2f}±{100.0 * self.std:.2f}"

    def to_dict(self, **extra):
        data = {
            "task": self.task,
            "metric": self.metric,
            "runs": [sig6(v) for v in self.values],
            "mean": sig6(self.mean),
            "std": sig6(self.std),
            "formatted": self.format(),
        }
        data.update(extra)
        return data

    def __repr__(self):
        return f"MetricReport({self.task}/{self.metric}: {self.format()})"


# attack reports share the metric layout
AttackReport = MetricReport


class EfficiencyReport:
    seconds: float
    artifact_bytes: int

    def __init__(self, seconds, artifact_bytes, epochs, timings=None):
        self.seconds = float(seconds)
        self.artifact_bytes = int(artifact_bytes)
        self.epochs = int(epochs)
        self.timings = [float(t) for t in (timings or [seconds])]

    def to_dict(self):
        return {
            "seconds": sig6(self.seconds),
            "timings": [sig6(t) for t in self.timings],
            "artifact_bytes": self.artifact_bytes,
            "epochs": self.epochs,
        }


async def _gather_runs(fn, count, workers):
    semaphore = asyncio.Semaphore(workers)

    async def guarded(run):
        async with semaphore:
            return await asyncio.to_thread(fn, run)

    return await asyncio.gather(*(guarded(run) for run in range(count)))


def run_repeats(fn, count, workers=1):
    """
    Calls ``fn(run)`` for run in range(count) and returns the results in run order.

    With more than one worker the runs execute on threads, at most ``workers`` at
    a time. Each run must derive its randomness from its run index alone.
    """
    if workers <= 1 or count <= 1:
        return [fn(run) for run in range(count)]
    return list(asyncio.run(_gather_runs(fn, count, workers)))
