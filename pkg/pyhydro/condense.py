import logging
import math

import numpy as np
import pandas as pd
import scipy.sparse as sp

from .evaluation import lp_f1, make_edge_split, train_lp
from .exceptions import ConfigurationError, EvaluationError, NumericalError, ValidationError
from .graphs import CondensedGraph, WeightedGraph, induced_subgraph, normalize_matrix, normalized_adjacency
from .helper import run_repeats
from .hyperbolic import HyperbolicStructureNet, RiemannianSGD
from .numerics import SGD, Rng, Tape, Tensor, normalize_symmetric, ops, second_largest_eigenvalue_diff
from .spectral import select, spectral_gap

log = logging.getLogger(__name__)

HISTORY_COLUMNS = ["repeat", "epoch", "phase", "total", "gradient", "spectral", "regularization", "val_f1"]


def budget_from_rate(g, rate, basis="labeled"):
    """
    Per-class condensed node counts for a reduction rate.

    The total is round(rate * |train|) (halves round up) and is spread over the
    classes in proportion to the train split's class distribution by largest
    remainder, with at least one node per class.

    Args:
        g (GraphBundle): The original graph.
        rate (float): Reduction rate of the labeled (train) nodes, or of all
            nodes when ``basis`` is "overall".
        basis (str): "labeled" or "overall".

    Returns:
        np.ndarray: int64 count per class.

    Raises:
        ConfigurationError: If the total is below the class count or a class
            has no train nodes.
    """
    train = g.split.train_idx
    counts = g.class_distribution(train)
    size = train.size
    if basis == "overall":
        rate = rate * g.num_nodes / size
    elif basis != "labeled":
        raise ConfigurationError(f"Unknown rate basis {basis!r}")

    total = int(math.floor(rate * size + 0.5))
    empty = np.flatnonzero(counts == 0)
    if empty.size:
        raise ConfigurationError(f"Class {int(empty[0])} has no train nodes")
    if total < g.num_classes:
        raise ConfigurationError(
            f"Rate {rate:g} keeps {total} of {size} train nodes, fewer than the {g.num_classes} classes"
        )
    if total > size:
        raise ConfigurationError(f"Rate {rate:g} asks for {total} nodes but the train split has {size}")

    quotas = total * counts / size
    budget = np.minimum(np.maximum(np.floor(quotas).astype(np.int64), 1), counts)
    remainders = quotas - np.floor(quotas)
    classes = np.arange(g.num_classes)
    while budget.sum() < total:
        for cls in np.lexsort((classes, -remainders)):
            if budget.sum() == total:
                break
            if budget[cls] < counts[cls]:
                budget[cls] += 1
    while budget.sum() > total:
        for cls in np.lexsort((classes, remainders)):
            if budget.sum() == total:
                break
            if budget[cls] > 1:
                budget[cls] -= 1
    return budget


def init_condensed(g, budget, selection):
    """
    The condensed graph before optimization.

    Y' repeats each class ``budget[c]`` times in class order; X' copies the
    selected feature rows. A' stays empty until the structure net produces it.

    Raises:
        ValidationError: If the selection does not match the budget.
    """
    budget = np.asarray(budget, dtype=np.int64)
    labels = np.repeat(np.arange(g.num_classes), budget)
    if selection.selected.size != labels.size or np.any(g.labels[selection.selected] != labels):
        raise ValidationError("Selected nodes do not match the per-class budget")
    provenance = {"dataset": g.name, "selection": selection.method}
    return CondensedGraph(
        np.zeros((labels.size, labels.size)), selection.init_features, labels, g.num_classes, provenance
    )


class SgcModel:
    """
    Simplified graph convolution: softmax(S^K X W1 W2).

    With ``hidden_units == 0`` the model is the single linear layer S^K X W.
    Gradients of its cross-entropy are formed analytically, which keeps the
    matching loss a first-order tape expression in X' and A'.
    """

    def __init__(self, in_features, num_classes, hidden_units=256, layers=2, rng=None):
        self.in_features = int(in_features)
        self.num_classes = int(num_classes)
        self.hidden_units = int(hidden_units)
        self.layers = int(layers)
        self.params = {}
        if rng is not None:
            self.reset(rng)

    @property
    def block_names(self):
        return ["W1", "W2"] if self.hidden_units else ["W"]

    def reset(self, rng):
        """Glorot-uniform re-initialization in place."""
        shapes = (
            {"W1": (self.in_features, self.hidden_units), "W2": (self.hidden_units, self.num_classes)}
            if self.hidden_units
            else {"W": (self.in_features, self.num_classes)}
        )
        for name, shape in shapes.items():
            bound = np.sqrt(6.0 / sum(shape))
            value = rng.uniform(-bound, bound, size=shape)
            if name in self.params:
                self.params[name][...] = value
            else:
                self.params[name] = value

    def propagate(self, matrix, features):
        out = features
        for _ in range(self.layers):
            if sp.issparse(matrix):
                out = np.asarray(matrix @ out) if not isinstance(out, Tensor) else ops.sparse_matmul(matrix, out)
            else:
                out = ops.matmul(matrix, out)
        return out

    def logits(self, propagated):
        if self.hidden_units:
            return ops.matmul(ops.matmul(propagated, self.params["W1"]), self.params["W2"])
        return ops.matmul(propagated, self.params["W"])

    def loss(self, propagated, labels):
        return ops.softmax_cross_entropy(self.logits(propagated), labels)

    def gradient_blocks(self, propagated, labels):
        """
        Gradients of the mean cross-entropy w.r.t. each weight matrix.

        With G = (softmax(logits) - Y) / m: dW2 = (Z W1)^T G, dW1 = Z^T G W2^T.
        The result stays on the tape of ``propagated``.

        Returns:
            list: One Tensor per block, in ``block_names`` order.
        """
        labels = np.asarray(labels, dtype=np.int64)
        onehot = ops.one_hot(labels, self.num_classes)
        if self.hidden_units:
            hidden = ops.matmul(propagated, self.params["W1"])
            logits = ops.matmul(hidden, self.params["W2"])
        else:
            logits = ops.matmul(propagated, self.params["W"])
        residual = ops.div(ops.sub(ops.softmax(logits, axis=1), onehot), float(labels.size))
        if self.hidden_units:
            grad_w2 = ops.matmul(ops.transpose(hidden), residual)
            grad_w1 = ops.matmul(ops.transpose(propagated), ops.matmul(residual, self.params["W2"].T))
            return [grad_w1, grad_w2]
        return [ops.matmul(ops.transpose(propagated), residual)]

    def task_gradient(self, propagated, labels):
        blocks = self.gradient_blocks(ops.value_of(propagated), labels)
        return {name: block.value for name, block in zip(self.block_names, blocks)}


def sgc_gradient(model, adjacency, X, Y, cls):
    """
    The SGC gradient on the class-``cls`` rows.

    Args:
        model (SgcModel): Current weights.
        adjacency: Normalized propagation matrix (sparse, array or Tensor).
        X: Features (array or Tensor).
        Y (array-like): Labels.
        cls (int): The class.

    Returns:
        list or None: Gradient blocks, or None when the class is empty.
    """
    labels = np.asarray(Y, dtype=np.int64)
    rows = np.flatnonzero(labels == cls)
    if rows.size == 0:
        return None
    propagated = model.propagate(adjacency, X)
    return model.gradient_blocks(ops.take(propagated, rows), labels[rows])


def flatten_gradient(blocks):
    return np.concatenate([np.ravel(ops.value_of(block)) for block in blocks])


def gradient_matching_loss(g_real, g_synth):
    """
    Sum over parameter blocks of 1 - cos(real, synth).

    A block that is zero on both sides contributes 0, a block that is zero on
    one side contributes 1.
    """
    if not isinstance(g_real, (list, tuple)):
        g_real, g_synth = [g_real], [g_synth]
    if len(g_real) != len(g_synth):
        raise ValueError(f"Got {len(g_real)} real and {len(g_synth)} synthetic gradient blocks")
    total = Tensor(0.0)
    for real, synth in zip(g_real, g_synth):
        rv, sv = ops.value_of(real), ops.value_of(synth)
        if rv.shape != sv.shape:
            raise ValueError(f"Gradient block shapes differ: {rv.shape} and {sv.shape}")
        real_zero = not np.any(rv)
        synth_zero = not np.any(sv)
        if real_zero and synth_zero:
            continue
        if real_zero or synth_zero:
            total = ops.add(total, 1.0)
            continue
        rf, sf = ops.reshape(real, (-1,)), ops.reshape(synth, (-1,))
        norms = ops.mul(ops.norm(rf, keepdims=False), ops.norm(sf, keepdims=False))
        cosine = ops.div(ops.sum(ops.mul(rf, sf)), norms)
        total = ops.add(total, ops.sub(1.0, cosine))
    return total


def spectral_loss(adjacency, sampled_original):
    """
    |(1 - lambda_2(A')) - S_sampling| on the tape of ``adjacency``.

    Args:
        adjacency (Tensor, array or WeightedGraph): The synthetic adjacency.
        sampled_original (WeightedGraph, GraphBundle or float): The sampled
            original subgraph, or its precomputed spectral gap.
    """
    if isinstance(adjacency, WeightedGraph):
        adjacency = adjacency.weights
    target = sampled_original if isinstance(sampled_original, float) else spectral_gap(sampled_original)
    gap = ops.sub(1.0, second_largest_eigenvalue_diff(adjacency))
    return ops.abs(ops.sub(gap, target))


def frobenius(adjacency):
    return ops.norm(ops.reshape(adjacency, (-1,)), keepdims=False)


def update_phase(epoch, tau1, tau2):
    """"feature" for the first tau1 epochs of every tau1 + tau2 window, else "structure"."""
    return "feature" if epoch % (tau1 + tau2) < tau1 else "structure"


class RepeatResult:
    def __init__(self, repeat, graph, net, val_f1, epoch, history):
        self.repeat = repeat
        self.graph = graph
        self.net = net
        self.val_f1 = val_f1
        self.epoch = epoch
        self.history = history


class Condenser:
    """
    One configured condensation problem, run once per repeat.

    Attributes:
        g (GraphBundle): The original graph.
        observed (GraphBundle): ``g`` restricted to the edge split's train edges.
        split (EdgeSplit): Link-prediction split used for checkpoint validation.
        cfg (CondenseConfig): Hyperparameters.
        budget (np.ndarray): Per-class condensed node counts.
        initial (CondensedGraph): Labels and initial features.
    """

    def __init__(self, g, split, cfg, budget, initial):
        self.g = g
        self.split = split
        self.cfg = cfg
        self.budget = budget
        self.initial = initial
        self.observed = g.with_edges(split.train_pos)
        self.synth_labels = initial.labels
        self.num_classes = g.num_classes

        sgc = SgcModel(g.num_features, g.num_classes, cfg.hidden_units, cfg.sgc_layers)
        propagation = normalized_adjacency(self.observed, add_self_loops=True)
        self.real_propagated = sgc.propagate(propagation, np.asarray(g.features, dtype=np.float64))

        self.class_nodes = [self.observed.train_nodes_of_class(cls) for cls in range(self.num_classes)]
        self.sample_sizes = [
            min(max(cfg.sample_size, int(budget[cls]) * cfg.sample_multiplier), nodes.size)
            for cls, nodes in enumerate(self.class_nodes)
        ]
        self.val_partition = "val"
        if split.positives["val"].shape[0] == 0:
            log.warning("Edge split has no validation edges; checkpoints are scored on train edges")
            self.val_partition = "train"

    def sample(self, generator):
        return [
            np.sort(generator.choice(nodes, size=size, replace=False)) if size else nodes[:0]
            for nodes, size in zip(self.class_nodes, self.sample_sizes)
        ]

    def propagate_synth(self, sgc, adjacency, features):
        return sgc.propagate(normalize_symmetric(adjacency, add_self_loops=True), features)

    def epoch_loss(self, t, sgc, net, features, params, samples, target_gap):
        """
        Accumulates the per-class loss of epoch ``t``.

        Returns:
            tuple: (total Tensor, dict of component sums).
        """
        cfg = self.cfg
        adjacency = net.adjacency(features, params, update_stats=True)
        synth = self.propagate_synth(sgc, adjacency, features)
        total = Tensor(0.0)
        parts = {"gradient": 0.0, "spectral": 0.0, "regularization": 0.0}
        for cls in range(self.num_classes):
            if cfg.strict_loop and cls > 0:
                adjacency = net.adjacency(features, params)
                synth = self.propagate_synth(sgc, adjacency, features)
            nodes = samples[cls]
            if nodes.size == 0:
                continue
            real = [block.value for block in sgc.gradient_blocks(self.real_propagated[nodes], np.full(nodes.size, cls))]
            rows = np.flatnonzero(self.synth_labels == cls)
            matched = sgc.gradient_blocks(ops.take(synth, rows), self.synth_labels[rows])

            gradient = gradient_matching_loss(real, matched)
            spectral = spectral_loss(adjacency, target_gap)
            regularization = ops.mul(cfg.beta, frobenius(adjacency))
            class_loss = ops.add(ops.add(gradient, spectral), regularization)
            if not np.isfinite(class_loss.value):
                raise NumericalError(f"Non-finite loss at epoch {t}, class {cls}", epoch=t, cls=cls)
            total = ops.add(total, class_loss)
            parts["gradient"] += gradient.item()
            parts["spectral"] += spectral.item()
            parts["regularization"] += regularization.item()
        return total, parts

    def checkpoint(self, t, net, features, seed):
        # eval-mode normalization: the saved net maps X' back to this A'
        weights = net.adjacency(features, training=False).value
        snapshot = CondensedGraph(weights, features.copy(), self.synth_labels, self.num_classes,
                                  dict(self.initial.provenance))
        try:
            model = train_lp(snapshot, None, seed=seed, epochs=self.cfg.lp_epochs, hidden=self.cfg.lp_hidden,
                             lr=self.cfg.lp_lr, edge_threshold=self.cfg.edge_threshold)
            score = lp_f1(model, self.g, self.split, self.val_partition)
        except EvaluationError as e:
            log.warning(f"Checkpoint at epoch {t} could not be scored: {e}")
            score = 0.0
        return snapshot, score

    def run(self, repeat):
        """
        Runs the optimization loop for one repeat.

        Returns:
            RepeatResult: The best checkpoint of this repeat and its history.
        """
        cfg = self.cfg
        rng = Rng(cfg.seed).child(f"repeat-{repeat}")
        features = {"features": np.array(self.initial.features, dtype=np.float64)}
        net = HyperbolicStructureNet(self.g.num_features, cfg.hidden_units, cfg.struct_layers, cfg.curvature,
                                     cfg.batch_norm, rng=rng.stream("struct-init"))
        struct_opt = RiemannianSGD(net.params, cfg.lr_struct, net.ball, net.manifold_params(), cfg.momentum,
                                   cfg.weight_decay)
        feat_opt = SGD(features, cfg.lr_feat)
        sgc = SgcModel(self.g.num_features, self.num_classes, cfg.hidden_units, cfg.sgc_layers,
                       rng=rng.stream("sgc-init/0"))
        sgc_opt = SGD(sgc.params, cfg.lr_sgc)
        reinit_every = max(1, math.ceil(cfg.epochs / cfg.outer_loops))
        sample_stream = rng.stream("sample")

        rows = []
        best = None
        for t in range(cfg.epochs):
            if t > 0 and t % reinit_every == 0:
                sgc.reset(rng.stream(f"sgc-init/{t // reinit_every}"))
                sgc_opt = SGD(sgc.params, cfg.lr_sgc)

            phase = update_phase(t, cfg.tau1, cfg.tau2)
            tape = Tape()
            if phase == "feature":
                x = tape.variable(features["features"], name="features")
                params = None
            else:
                x = Tensor(features["features"])
                params = net.bind(tape)

            samples = self.sample(sample_stream)
            union = np.sort(np.concatenate(samples))
            target_gap = spectral_gap(induced_subgraph(self.observed, union)) if union.size >= 2 else 0.0
            total, parts = self.epoch_loss(t, sgc, net, x, params, samples, target_gap)
            if not np.isfinite(total.value):
                raise NumericalError(f"Non-finite total loss at epoch {t}", epoch=t)

            grads = tape.backward(total)
            if phase == "feature":
                feat_opt.step({"features": grads[x]})
            else:
                struct_opt.step({name: grads[param] for name, param in params.items()})

            weights = net.adjacency(features["features"]).value
            propagated = sgc.propagate(normalize_matrix(weights, add_self_loops=True), features["features"])
            for _ in range(cfg.inner_loops):
                sgc_opt.step(sgc.task_gradient(propagated, self.synth_labels))

            row = {"repeat": repeat, "epoch": t, "phase": phase, "total": total.item(), **parts, "val_f1": np.nan}
            log.debug(
                f"Epoch {t} ({phase}): total={row['total']:.6g} gradient={parts['gradient']:.6g} "
                f"spectral={parts['spectral']:.6g} regularization={parts['regularization']:.6g}"
            )

            if (t + 1) % cfg.eval_every == 0 or t + 1 == cfg.epochs:
                snapshot, score = self.checkpoint(t, net, features["features"], rng.child(f"checkpoint-{t}").seed)
                row["val_f1"] = score
                log.info(f"Repeat {repeat}, epoch {t + 1}: total={row['total']:.6g}, val F1 {score:.4f}")
                if best is None or score > best[2]:
                    best = (snapshot, HyperbolicStructureNet.from_state(*net.state()), score, t)
            rows.append(row)

        history = pd.DataFrame(rows, columns=HISTORY_COLUMNS)
        snapshot, best_net, score, epoch = best
        return RepeatResult(repeat, snapshot, best_net, score, epoch, history)


def condense(g, cfg, split=None):
    """
    Condenses ``g`` into a small synthetic graph.

    Selects the initial nodes by algebraic Jaccard similarity, then alternates
    feature and structure updates that match SGC gradients and the spectral gap
    of sampled original subgraphs. Every ``eval_every`` epochs (and at the end)
    the condensed graph is scored by validation link-prediction F1; the best
    checkpoint over all repeats is returned, ties going to the lower repeat.

    Args:
        g (GraphBundle): The original graph.
        cfg (CondenseConfig): Hyperparameters.
        split (EdgeSplit, optional): Link-prediction split; drawn from
            ``cfg.seed`` when omitted. Only its train edges are observed.

    Returns:
        CondensedGraph: With ``history``, ``net`` and ``selection`` attached.

    Raises:
        ConfigurationError: On an invalid config or infeasible budget.
        NumericalError: On a non-finite loss, with epoch and class context.
    """
    cfg.validate()
    split = split if split is not None else make_edge_split(g, seed=cfg.seed)
    observed = g.with_edges(split.train_pos)
    budget = budget_from_rate(g, cfg.reduction_rate, cfg.rate_basis)
    selection = select(
        observed,
        budget,
        method=cfg.selection,
        k_eig=cfg.k_eig or None,
        epsilon=cfg.epsilon,
        dense_threshold=cfg.dense_threshold,
        rng=Rng(cfg.seed),
    )
    initial = init_condensed(g, budget, selection)
    condenser = Condenser(g, split, cfg, budget, initial)
    log.info(f"Condensing {g.name or 'graph'} to {int(budget.sum())} nodes over {cfg.repeats} repeat(s)")

    results = run_repeats(condenser.run, cfg.repeats, cfg.workers)
    scores = np.array([result.val_f1 for result in results])
    best = results[int(np.argmax(scores))]

    condensed = best.graph
    condensed.provenance.update(
        {
            "config_hash": cfg.config_hash(),
            "seed": cfg.seed,
            "reduction_rate": cfg.reduction_rate,
            "edge_seed": split.seed,
            "repeat": best.repeat,
            "epoch": best.epoch,
            "val_f1": best.val_f1,
        }
    )
    condensed.history = pd.concat([result.history for result in results], ignore_index=True)
    condensed.net = best.net
    condensed.selection = selection
    log.info(
        f"Successfully condensed {g.name or 'graph'}: {condensed.num_nodes} nodes, "
        f"{condensed.count_edges(cfg.edge_threshold)} edges, val F1 {best.val_f1:.4f}"
    )
    return condensed
