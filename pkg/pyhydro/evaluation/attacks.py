import logging

import numpy as np
from sklearn.metrics import accuracy_score, f1_score

from .gcn import Gcn, propagation_matrix
from .linkpred import LpModel, pair_keys, sample_non_edges
from ..exceptions import NumericalError, SamplingError
from ..graphs import CondensedGraph
from ..helper import AttackReport, run_repeats
from ..numerics import Adam, Rng, Tape, ops

log = logging.getLogger(__name__)


class NodeClassifier:
    """Two-layer GCN node classifier, the target model of the membership attack."""

    def __init__(self, in_features, num_classes, hidden=256, rng=None):
        self.model = Gcn(in_features, hidden, num_classes, rng if rng is not None else Rng(0).stream("target-init"))
        self.losses = []

    def predict_proba(self, graph):
        """Softmax class probabilities, propagating ``graph``'s own features."""
        return ops.softmax(self.model.output(graph), axis=1).value

    def confidence(self, graph, nodes):
        return self.predict_proba(graph)[np.asarray(nodes, dtype=np.int64)].max(axis=1)


def train_node_classifier(graph, seed=0, epochs=200, hidden=256, lr=0.01):
    """
    Trains the attack target.

    Condensed graphs train on every condensed node; original bundles on their
    train split.

    Returns:
        NodeClassifier
    """
    rng = Rng(seed)
    matrix = propagation_matrix(graph)
    features = np.asarray(graph.features, dtype=np.float64)
    propagated = np.asarray(matrix @ features)
    if isinstance(graph, CondensedGraph):
        nodes = np.arange(graph.num_nodes)
    else:
        nodes = graph.split.train_idx
    labels = graph.labels[nodes]

    target = NodeClassifier(features.shape[1], graph.num_classes, hidden, rng.stream("target-init"))
    optimizer = Adam(target.model.params, lr=lr)
    for epoch in range(epochs):
        tape = Tape()
        params = {name: tape.variable(value, name=name) for name, value in target.model.params.items()}
        logits = ops.take(target.model.forward(matrix, propagated, params), nodes)
        loss = ops.softmax_cross_entropy(logits, labels)
        if not np.isfinite(loss.value):
            raise NumericalError(f"Non-finite classifier loss at epoch {epoch}", epoch=epoch)
        grads = tape.backward(loss)
        optimizer.step({name: grads[param] for name, param in params.items()})
        target.losses.append(loss.item())
    return target


def fit_threshold(scores, is_member):
    """
    The threshold t maximizing accuracy of the rule "member iff score > t".

    Candidates are -inf and every distinct score. Among equally accurate
    thresholds the largest wins, so ties resolve to non-member.
    """
    scores = np.asarray(scores, dtype=np.float64)
    is_member = np.asarray(is_member, dtype=bool)
    candidates = np.concatenate([[-np.inf], np.unique(scores)])
    members = np.sort(scores[is_member])
    others = np.sort(scores[~is_member])
    members_above = members.size - np.searchsorted(members, candidates, side="right")
    others_below = np.searchsorted(others, candidates, side="right")
    accuracy = (members_above + others_below) / max(scores.size, 1)
    best = candidates.size - 1 - int(np.argmax(accuracy[::-1]))
    return float(candidates[best])


def threshold_attack(member_scores, other_scores, generator, metric="accuracy"):
    """
    Fits a threshold on a calibration half and scores the other half.

    Both populations are split in half independently, so each half stays balanced.
    """
    member_scores = np.asarray(member_scores, dtype=np.float64)
    other_scores = np.asarray(other_scores, dtype=np.float64)
    m_order = generator.permutation(member_scores.size)
    o_order = generator.permutation(other_scores.size)
    m_half, o_half = member_scores.size // 2, other_scores.size // 2

    calib_scores = np.concatenate([member_scores[m_order[:m_half]], other_scores[o_order[:o_half]]])
    calib_truth = np.concatenate([np.ones(m_half, dtype=bool), np.zeros(o_half, dtype=bool)])
    eval_scores = np.concatenate([member_scores[m_order[m_half:]], other_scores[o_order[o_half:]]])
    eval_truth = np.concatenate(
        [np.ones(member_scores.size - m_half, dtype=int), np.zeros(other_scores.size - o_half, dtype=int)]
    )

    threshold = fit_threshold(calib_scores, calib_truth)
    predicted = (eval_scores > threshold).astype(int)
    if metric == "f1":
        return float(f1_score(eval_truth, predicted, zero_division=0))
    return float(accuracy_score(eval_truth, predicted))


def attack_mia(target, g, runs=10, seed=0, workers=1):
    """
    Confidence-threshold membership inference against a node classifier.

    Members are the original train nodes and non-members the test nodes. Each
    run draws a balanced sample, fits the threshold on one half and reports
    accuracy on the other. The target is queried on the original graph.

    Args:
        target (NodeClassifier): The trained target.
        g (GraphBundle): The original graph.
        runs (int): Seeded attack runs.
        seed (int): Attack seed.

    Returns:
        AttackReport: Accuracy per run.

    Raises:
        SamplingError: If the graph has no test nodes.
    """
    members, others = g.split.train_idx, g.split.test_idx
    if members.size < 2 or others.size < 2:
        raise SamplingError("Membership inference needs at least 2 train and 2 test nodes")
    probabilities = target.predict_proba(g)
    confidence = probabilities.max(axis=1)
    size = min(members.size, others.size)
    base = Rng(seed)

    def one_run(run):
        generator = base.stream(f"mia/{run}")
        m = generator.choice(members, size=size, replace=False)
        o = generator.choice(others, size=size, replace=False)
        return threshold_attack(confidence[m], confidence[o], generator, metric="accuracy")

    report = AttackReport("accuracy", run_repeats(one_run, runs, workers), task="mia")
    log.info(f"MIA on {g.name or 'graph'}: accuracy {report.format()}")
    return report


def attack_lmia(target, g, split, runs=10, seed=0, workers=1):
    """
    Score-threshold link membership inference against a link predictor.

    Members are the original train edges. Non-members are verified non-edges
    that were never used as negatives by the split. The target scores pairs
    with embeddings computed over the train edges of ``g``.

    Args:
        target (LpModel): The trained link predictor.
        g (GraphBundle): The original graph.
        split (EdgeSplit): The original graph's edge split.
        runs (int): Seeded attack runs.
        seed (int): Attack seed.

    Returns:
        AttackReport: F1 per run.

    Raises:
        SamplingError: If there are too few unused non-edges.
    """
    members = split.train_pos
    if members.shape[0] < 2:
        raise SamplingError("Link membership inference needs at least 2 train edges")
    forbidden = np.concatenate([pair_keys(g.edge_array(), g.num_nodes), split.all_negative_keys()])
    embeddings = target.embed(g.with_edges(split.train_pos))
    base = Rng(seed)

    def one_run(run):
        generator = base.stream(f"lmia/{run}")
        others = sample_non_edges(g.num_nodes, forbidden, members.shape[0], generator)
        chosen = members[np.sort(generator.choice(members.shape[0], size=others.shape[0], replace=False))]
        return threshold_attack(
            LpModel.decode(embeddings, chosen), LpModel.decode(embeddings, others), generator, metric="f1"
        )

    report = AttackReport("f1", run_repeats(one_run, runs, workers), task="lmia")
    log.info(f"LMIA on {g.name or 'graph'}: F1 {report.format()}")
    return report
