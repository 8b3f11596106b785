import logging

import numpy as np
from sklearn.metrics import f1_score

from .gcn import Gcn, propagation_matrix
from ..exceptions import EvaluationError, NumericalError, SamplingError, ValidationError
from ..graphs import CondensedGraph, GraphBundle
from ..helper import MetricReport, run_repeats
from ..numerics import Adam, Rng, Tape, ops

log = logging.getLogger(__name__)

DEFAULT_RATIOS = (0.7, 0.1, 0.2)
PARTITIONS = ("train", "val", "test")


def pair_keys(pairs, num_nodes):
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    return np.minimum(pairs[:, 0], pairs[:, 1]) * num_nodes + np.maximum(pairs[:, 0], pairs[:, 1])


def sample_non_edges(num_nodes, forbidden_keys, count, generator):
    """
    Uniformly samples ``count`` distinct node pairs (u < v) whose keys are not forbidden.

    Args:
        num_nodes (int): Number of nodes.
        forbidden_keys (np.ndarray): Keys u * n + v of true edges and excluded pairs.
        count (int): Number of pairs to draw.
        generator (np.random.Generator): The sampling stream.

    Returns:
        np.ndarray: (count, 2) pairs in draw order.

    Raises:
        SamplingError: If fewer than ``count`` candidate pairs exist.
    """
    forbidden = np.unique(np.asarray(forbidden_keys, dtype=np.int64))
    available = num_nodes * (num_nodes - 1) // 2 - forbidden.size
    if count > available:
        raise SamplingError(f"Need {count} non-edges but only {available} exist")
    if count == 0:
        return np.zeros((0, 2), dtype=np.int64)

    if 2 * count > available:
        # dense regime: enumerate the candidates instead of rejecting
        rows, cols = np.triu_indices(num_nodes, k=1)
        keys = rows * num_nodes + cols
        keep = ~np.isin(keys, forbidden)
        candidates = np.stack([rows[keep], cols[keep]], axis=1)
        return candidates[generator.permutation(candidates.shape[0])[:count]].astype(np.int64)

    chosen = np.zeros(0, dtype=np.int64)
    while chosen.size < count:
        draw = generator.integers(0, num_nodes, size=(2 * (count - chosen.size) + 16, 2))
        draw = draw[draw[:, 0] != draw[:, 1]]
        keys = pair_keys(draw, num_nodes)
        keys = keys[~np.isin(keys, forbidden) & ~np.isin(keys, chosen)]
        _, first = np.unique(keys, return_index=True)
        keys = keys[np.sort(first)]
        chosen = np.concatenate([chosen, keys[: count - chosen.size]])
    return np.stack([chosen // num_nodes, chosen % num_nodes], axis=1)


class EdgeSplit:
    """
    Train/val/test positive edges with equally many sampled non-edges per partition.

    Attributes:
        num_nodes (int): Node count of the split graph.
        positives (dict): Partition name to (k, 2) edge array.
        negatives (dict): Partition name to (k, 2) non-edge array.
        seed (int): The seed the split was drawn with.
    """

    def __init__(self, num_nodes, positives, negatives, seed):
        self.num_nodes = int(num_nodes)
        self.positives = {name: np.asarray(positives[name], dtype=np.int64).reshape(-1, 2) for name in PARTITIONS}
        self.negatives = {name: np.asarray(negatives[name], dtype=np.int64).reshape(-1, 2) for name in PARTITIONS}
        self.seed = int(seed)

    @property
    def train_pos(self):
        return self.positives["train"]

    @property
    def train_neg(self):
        return self.negatives["train"]

    def partition(self, name):
        if name not in PARTITIONS:
            raise ValueError(f"Unknown partition {name!r}")
        return self.positives[name], self.negatives[name]

    def all_negative_keys(self):
        return np.concatenate([pair_keys(self.negatives[name], self.num_nodes) for name in PARTITIONS])

    def validate(self, g):
        """
        Raises:
            ValidationError: If partitions overlap, a negative is an edge, or counts differ.
        """
        edge_keys = pair_keys(g.edge_array(), g.num_nodes)
        seen = np.zeros(0, dtype=np.int64)
        for name in PARTITIONS:
            pos, neg = self.partition(name)
            if pos.shape[0] != neg.shape[0]:
                raise ValidationError(f"Partition {name} has {pos.shape[0]} positives and {neg.shape[0]} negatives")
            keys = np.concatenate([pair_keys(pos, self.num_nodes), pair_keys(neg, self.num_nodes)])
            if np.isin(keys, seen).any() or np.unique(keys).size != keys.size:
                raise ValidationError(f"Partition {name} overlaps another partition")
            if np.isin(pair_keys(neg, self.num_nodes), edge_keys).any():
                raise ValidationError(f"Partition {name} has a negative that is a true edge")
            seen = np.concatenate([seen, keys])

    def to_dict(self):
        return {
            "seed": self.seed,
            "sizes": {name: int(self.positives[name].shape[0]) for name in PARTITIONS},
        }


def make_edge_split(g, seed=0, ratios=DEFAULT_RATIOS):
    """
    Splits the edges of ``g`` and samples balanced negatives.

    Args:
        g (GraphBundle): The original graph.
        seed (int): Split seed.
        ratios (tuple): Train, val and test shares of the edges.

    Returns:
        EdgeSplit

    Raises:
        SamplingError: If the graph has too few non-edges.
    """
    rng = Rng(seed)
    edges = g.edge_array()
    m = edges.shape[0]
    order = rng.stream("edge-split").permutation(m)
    n_test = int(round(ratios[2] * m))
    n_val = int(round(ratios[1] * m))
    n_train = m - n_val - n_test
    bounds = {"train": (0, n_train), "val": (n_train, n_train + n_val), "test": (n_train + n_val, m)}

    negatives_all = sample_non_edges(
        g.num_nodes, pair_keys(edges, g.num_nodes), m, rng.stream("edge-split/negatives")
    )
    positives, negatives = {}, {}
    for name, (start, stop) in bounds.items():
        part = edges[order[start:stop]]
        positives[name] = part[np.lexsort((part[:, 1], part[:, 0]))]
        negatives[name] = negatives_all[start:stop]
    split = EdgeSplit(g.num_nodes, positives, negatives, seed)
    log.info(f"Split {m} edges of {g.name or 'graph'} into {n_train}/{n_val}/{n_test}")
    return split


def f1_from_scores(pos_scores, neg_scores, threshold=0.5):
    """F1 of the rule score > threshold over positives and negatives."""
    scores = np.concatenate([np.asarray(pos_scores, dtype=np.float64), np.asarray(neg_scores, dtype=np.float64)])
    truth = np.concatenate([np.ones(len(pos_scores), dtype=int), np.zeros(len(neg_scores), dtype=int)])
    return float(f1_score(truth, (scores > threshold).astype(int), zero_division=0))


class LpModel:
    """
    Link predictor: a two-layer GCN encoder and a dot-product decoder.

    Attributes:
        encoder (Gcn): Encoder whose both layers have ``hidden`` units.
        losses (list): Training loss per epoch.
    """

    def __init__(self, in_features, hidden=128, rng=None):
        self.encoder = Gcn(in_features, hidden, hidden, rng if rng is not None else Rng(0).stream("lp-init"))
        self.losses = []

    @property
    def final_loss(self):
        return self.losses[-1] if self.losses else None

    def embed(self, graph):
        return self.encoder.output(graph)

    @staticmethod
    def decode(embeddings, pairs):
        pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
        logits = np.sum(embeddings[pairs[:, 0]] * embeddings[pairs[:, 1]], axis=1)
        return ops.sigmoid(logits).value

    def score(self, graph, pairs):
        return self.decode(self.embed(graph), pairs)


def supervision_pairs(graph, split, edge_threshold, generator):
    """
    Positive and negative training pairs.

    Bundles use the split's train partition. Condensed graphs treat pairs with
    weight above ``edge_threshold`` as positives and subsample the remaining
    pairs to the same count.

    Raises:
        EvaluationError: If a condensed graph has no pair above the threshold.
    """
    if isinstance(graph, GraphBundle):
        if split is None:
            raise EvaluationError("Training on an original graph needs an edge split")
        pos, neg = split.partition("train")
        if pos.shape[0] == 0:
            raise EvaluationError("The edge split has no train edges")
        return pos, neg

    weights = graph.adjacency_matrix()
    rows, cols = np.triu_indices(graph.num_nodes, k=1)
    values = weights[rows, cols]
    positive = values > edge_threshold
    if not positive.any():
        raise EvaluationError(
            f"No condensed pair has weight above edge_threshold={edge_threshold}; try a lower threshold"
        )
    if positive.all():
        median = float(np.median(values))
        log.warning(f"Every condensed pair exceeds edge_threshold={edge_threshold}; splitting at the median {median:.6g}")
        positive = values > median
        if not positive.any() or positive.all():
            raise EvaluationError("Condensed weights are constant; no negatives can be formed")
    pos = np.stack([rows[positive], cols[positive]], axis=1)
    candidates = np.stack([rows[~positive], cols[~positive]], axis=1)
    if candidates.shape[0] > pos.shape[0]:
        keep = np.sort(generator.choice(candidates.shape[0], size=pos.shape[0], replace=False))
        candidates = candidates[keep]
    return pos, candidates


def train_lp(graph, split=None, seed=0, epochs=100, hidden=128, lr=0.001, edge_threshold=0.5):
    """
    Trains a link predictor with binary cross-entropy.

    On a GraphBundle the encoder sees only the split's train edges. On a
    CondensedGraph it convolves over the weighted A' and never touches the
    original graph.

    Args:
        graph (GraphBundle or CondensedGraph): Training graph.
        split (EdgeSplit, optional): Required for bundles.
        seed (int): Initialization and negative-sampling seed.
        epochs (int): Full-batch Adam epochs.
        hidden (int): Encoder width.
        lr (float): Adam learning rate.
        edge_threshold (float): Condensed weight above which a pair is a link.

    Returns:
        LpModel

    Raises:
        EvaluationError: If no positive supervision exists.
        NumericalError: If the loss becomes non-finite.
    """
    rng = Rng(seed)
    if isinstance(graph, GraphBundle):
        observed = graph.with_edges(split.train_pos) if split is not None else graph
    else:
        observed = graph
    pos, neg = supervision_pairs(graph, split, edge_threshold, rng.stream("lp-negatives"))
    pairs = np.concatenate([pos, neg])
    targets = np.concatenate([np.ones(pos.shape[0]), np.zeros(neg.shape[0])])

    matrix = propagation_matrix(observed)
    features = np.asarray(observed.features, dtype=np.float64)
    propagated = np.asarray(matrix @ features)

    model = LpModel(features.shape[1], hidden, rng.stream("lp-init"))
    optimizer = Adam(model.encoder.params, lr=lr)
    for epoch in range(epochs):
        tape = Tape()
        params = {name: tape.variable(value, name=name) for name, value in model.encoder.params.items()}
        embeddings = model.encoder.forward(matrix, propagated, params)
        logits = ops.sum(ops.mul(ops.take(embeddings, pairs[:, 0]), ops.take(embeddings, pairs[:, 1])), axis=1)
        loss = ops.binary_cross_entropy_with_logits(logits, targets)
        if not np.isfinite(loss.value):
            raise NumericalError(f"Non-finite link-prediction loss at epoch {epoch}", epoch=epoch)
        grads = tape.backward(loss)
        optimizer.step({name: grads[param] for name, param in params.items()})
        model.losses.append(loss.item())
    log.debug(f"Trained link predictor on {graph.name or 'graph'}: final loss {model.final_loss:.6g}")
    return model


def lp_f1(model, g, split, partition="test", threshold=0.5):
    """
    F1 of ``model`` on one partition of the original graph's edge split.

    The encoder is applied to the original features over the split's train
    edges, which is how condensed-trained models are transferred.

    Raises:
        EvaluationError: If the partition is empty.
    """
    pos, neg = split.partition(partition)
    if pos.shape[0] == 0:
        raise EvaluationError(f"The {partition} partition of the edge split is empty")
    embeddings = model.embed(g.with_edges(split.train_pos))
    return f1_from_scores(LpModel.decode(embeddings, pos), LpModel.decode(embeddings, neg), threshold)


def run_lp(graph, bundle, split, runs=10, seed=0, epochs=100, hidden=128, lr=0.001, edge_threshold=0.5, workers=1):
    """
    Trains one link predictor per seeded run and reports test F1 on the original graph.

    Args:
        graph (GraphBundle or CondensedGraph): Training graph.
        bundle (GraphBundle): The original graph providing test edges.
        split (EdgeSplit): The original graph's edge split.
        runs (int): Number of seeded runs.
        seed (int): Run seed; run r uses a child seed derived from it.
        workers (int): Concurrent runs.

    Returns:
        MetricReport: F1 per run with mean and standard deviation.
    """
    base = Rng(seed)

    def one_run(run):
        run_seed = base.child(f"lp/{run}").seed
        model = train_lp(graph, split, run_seed, epochs, hidden, lr, edge_threshold)
        return lp_f1(model, bundle, split, "test")

    values = run_repeats(one_run, runs, workers)
    report = MetricReport("f1", values, task="lp")
    log.info(f"Link prediction on {bundle.name or 'graph'}: F1 {report.format()}")
    return report
