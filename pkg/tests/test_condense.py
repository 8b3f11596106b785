import numpy as np
import pytest

from pyhydro.adapters import save_condensed
from pyhydro.condense import (
    HISTORY_COLUMNS,
    Condenser,
    SgcModel,
    budget_from_rate,
    condense,
    flatten_gradient,
    gradient_matching_loss,
    init_condensed,
    sgc_gradient,
    spectral_loss,
    update_phase,
)
from pyhydro.config import CondenseConfig
from pyhydro.evaluation import make_edge_split
from pyhydro.exceptions import ConfigurationError, ValidationError
from pyhydro.graphs import WeightedGraph
from pyhydro.hyperbolic import HyperbolicStructureNet
from pyhydro.numerics import Tensor, check_gradients
from pyhydro.spectral import select

# train split sizes of the four benchmark datasets, with their labeled-node rates
BENCHMARK_BUDGETS = [
    (11002, 10, 0.005, 55),
    (11002, 10, 0.01, 110),
    (11002, 10, 0.02, 220),
    (6120, 8, 0.01, 61),
    (6120, 8, 0.02, 122),
    (6120, 8, 0.05, 306),
    (1117, 6, 0.019, 21),
    (1117, 6, 0.038, 42),
    (1117, 6, 0.075, 84),
    (15511, 7, 0.0014, 22),
    (15511, 7, 0.007, 109),
    (15511, 7, 0.014, 217),
]


def tiny_config(**overrides):
    values = dict(
        reduction_rate=0.125,
        epochs=8,
        tau1=2,
        tau2=2,
        hidden_units=8,
        struct_layers=1,
        sgc_layers=2,
        outer_loops=2,
        eval_every=4,
        lp_epochs=5,
        lp_hidden=8,
        sample_size=8,
        sample_multiplier=2,
        seed=3,
    )
    values.update(overrides)
    return CondenseConfig(**values)


@pytest.mark.parametrize("train_size, num_classes, rate, expected", BENCHMARK_BUDGETS)
def test_budget_matches_benchmark_node_counts(bundle_factory, train_size, num_classes, rate, expected):
    labels = np.arange(train_size) % num_classes
    g = bundle_factory(train_size, [], labels=labels, num_features=1)

    budget = budget_from_rate(g, rate)

    assert budget.sum() == expected
    assert budget.min() >= 1
    assert budget.max() - budget.min() <= 1


def test_budget_follows_class_distribution(bundle_factory):
    labels = np.array([0] * 60 + [1] * 30 + [2] * 10)
    g = bundle_factory(100, [], labels=labels, num_features=1)

    assert budget_from_rate(g, 0.1).tolist() == [6, 3, 1]
    assert budget_from_rate(g, 0.05).tolist() == [3, 1, 1]


def test_overall_rate_uses_all_nodes(bundle_factory):
    labels = np.arange(100) % 2
    g = bundle_factory(100, [], labels=labels, num_features=1, train=np.arange(80))

    assert budget_from_rate(g, 0.1, basis="overall").sum() == 10
    assert budget_from_rate(g, 0.1).sum() == 8


def test_budget_below_class_count_is_infeasible(bundle_factory):
    g = bundle_factory(100, [], labels=np.arange(100) % 4, num_features=1)

    with pytest.raises(ConfigurationError, match="fewer than the 4 classes"):
        budget_from_rate(g, 0.02)


def test_init_condensed_copies_selected_rows(bundle_factory):
    g = bundle_factory(5, [(0, 1), (1, 2)], labels=[0, 1, 0, 0, 1])
    selection = select(g, [2, 1])

    condensed = init_condensed(g, [2, 1], selection)

    assert condensed.labels.tolist() == [0, 0, 1]
    np.testing.assert_array_equal(condensed.features, g.features[selection.selected])
    assert condensed.class_histogram().tolist() == [2, 1]
    assert condensed.provenance["selection"] == "jaccard"


def test_init_condensed_rejects_mismatched_selection(bundle_factory):
    g = bundle_factory(5, [(0, 1)], labels=[0, 1, 0, 0, 1])
    selection = select(g, [1, 1])

    with pytest.raises(ValidationError):
        init_condensed(g, [2, 1], selection)


def test_schedule_alternates_feature_and_structure_windows():
    phases = [update_phase(t, 40, 10) for t in range(100)]

    assert phases[:40] == ["feature"] * 40
    assert phases[40:50] == ["structure"] * 10
    for start in range(0, 51):
        window = phases[start:start + 50]
        assert window.count("feature") == 40
        assert window.count("structure") == 10


def test_matching_loss_reference_values():
    g = [np.array([1.0, 2.0]), np.array([[0.5, -1.0]])]

    assert gradient_matching_loss(g, g).item() == pytest.approx(0.0, abs=1e-12)
    assert gradient_matching_loss(g, [-block for block in g]).item() == pytest.approx(4.0)
    assert gradient_matching_loss([np.zeros(2)], [np.zeros(2)]).item() == 0.0
    assert gradient_matching_loss([np.zeros(2)], [np.ones(2)]).item() == 1.0


def test_matching_loss_matches_direct_formula():
    rng = np.random.default_rng(5)
    real = [rng.normal(size=(3, 4)), rng.normal(size=(4, 2))]
    synth = [rng.normal(size=(3, 4)), rng.normal(size=(4, 2))]

    expected = sum(
        1.0 - np.dot(r.ravel(), s.ravel()) / (np.linalg.norm(r) * np.linalg.norm(s)) for r, s in zip(real, synth)
    )

    assert gradient_matching_loss(real, synth).item() == pytest.approx(expected, rel=1e-12)


def test_sgc_gradient_of_zero_weights_is_uniform_prediction():
    rng = np.random.default_rng(6)
    propagated = rng.normal(size=(6, 4))
    labels = np.array([0, 1, 2, 0, 1, 2])
    model = SgcModel(4, 3, hidden_units=0)
    model.params["W"] = np.zeros((4, 3))

    gradient = model.gradient_blocks(propagated, labels)[0].value

    onehot = np.eye(3)[labels]
    np.testing.assert_allclose(gradient, propagated.T @ (np.full((6, 3), 1.0 / 3.0) - onehot) / 6.0)


@pytest.mark.parametrize("hidden_units, block", [(0, "W"), (5, "W1"), (5, "W2")])
def test_sgc_gradient_matches_finite_differences(hidden_units, block):
    rng = np.random.default_rng(7)
    propagated = rng.normal(size=(8, 4))
    labels = rng.integers(0, 3, size=8)
    model = SgcModel(4, 3, hidden_units=hidden_units, rng=rng)
    original = model.params[block].copy()

    def loss(weight):
        model.params[block] = weight
        return model.loss(propagated, labels)

    report = check_gradients(loss, original)
    model.params[block] = original
    analytic = dict(zip(model.block_names, model.gradient_blocks(propagated, labels)))[block].value

    assert report.passed, report
    np.testing.assert_allclose(analytic, report.numeric, rtol=1e-5, atol=1e-9)


def test_sgc_gradient_skips_empty_class():
    model = SgcModel(2, 2, hidden_units=0, layers=1, rng=np.random.default_rng(0))
    adjacency = np.eye(3)

    assert sgc_gradient(model, adjacency, np.ones((3, 2)), [0, 0, 0], 1) is None
    assert flatten_gradient(sgc_gradient(model, adjacency, np.ones((3, 2)), [0, 0, 0], 0)).shape == (4,)


def test_identical_graphs_match_exactly():
    rng = np.random.default_rng(8)
    adjacency = np.ones((4, 4)) - np.eye(4)
    features = rng.normal(size=(4, 3))
    labels = [0, 1, 0, 1]
    model = SgcModel(3, 2, hidden_units=4, rng=rng)

    real = sgc_gradient(model, adjacency, features, labels, 0)
    synth = sgc_gradient(model, adjacency, features, labels, 0)

    assert gradient_matching_loss(real, synth).item() == pytest.approx(0.0, abs=1e-12)


def test_spectral_loss_reference_values(triangle, two_edges):
    complete = np.ones((3, 3)) - np.eye(3)

    assert spectral_loss(complete, WeightedGraph(two_edges.adjacency.toarray())).item() == pytest.approx(1.5)
    assert spectral_loss(complete, WeightedGraph(complete)).item() == pytest.approx(0.0, abs=1e-12)


def test_spectral_loss_is_permutation_invariant():
    rng = np.random.default_rng(9)
    weights = rng.uniform(size=(5, 5))
    weights = (weights + weights.T) / 2.0
    np.fill_diagonal(weights, 0.0)
    order = rng.permutation(5)
    sample = WeightedGraph([[0.0, 1.0, 0.0], [1.0, 0.0, 1.0], [0.0, 1.0, 0.0]])

    direct = spectral_loss(weights, sample).item()
    permuted = spectral_loss(weights[np.ix_(order, order)], sample).item()

    assert permuted == pytest.approx(direct, abs=1e-12)


def test_condense_produces_valid_artifact(small_sbm):
    cfg = tiny_config()

    condensed = condense(small_sbm, cfg)

    assert condensed.num_nodes == 9
    assert condensed.class_histogram().tolist() == [3, 3, 3]
    weights = condensed.adjacency_matrix()
    np.testing.assert_array_equal(weights, weights.T)
    assert np.all(np.diag(weights) == 0.0)
    assert condensed.provenance["config_hash"] == cfg.config_hash()
    assert condensed.provenance["seed"] == 3
    assert condensed.net is not None
    assert condensed.selection.selected.size == 9

    history = condensed.history
    assert list(history.columns) == HISTORY_COLUMNS
    assert len(history) == cfg.epochs
    assert history["phase"].tolist() == ["feature", "feature", "structure", "structure"] * 2
    components = history["gradient"] + history["spectral"] + history["regularization"]
    np.testing.assert_allclose(history["total"], components, atol=1e-6)
    assert history["val_f1"].notna().sum() == 2


def test_condense_is_deterministic(small_sbm):
    first = condense(small_sbm, tiny_config())
    second = condense(small_sbm, tiny_config())

    np.testing.assert_array_equal(first.adjacency_matrix(), second.adjacency_matrix())
    np.testing.assert_array_equal(first.features, second.features)


def test_zero_beta_removes_regularization(small_sbm):
    condensed = condense(small_sbm, tiny_config(beta=0.0, epochs=4, eval_every=4))

    assert (condensed.history["regularization"] == 0.0).all()


def test_random_selection_mode(small_sbm):
    condensed = condense(small_sbm, tiny_config(selection="random", epochs=4, eval_every=4))

    assert condensed.provenance["selection"] == "random"


@pytest.mark.slow
def test_repeats_keep_the_best_checkpoint(small_sbm):
    cfg = tiny_config(repeats=2, workers=2)

    condensed = condense(small_sbm, cfg)

    best = condensed.history.groupby("repeat")["val_f1"].max()
    assert condensed.provenance["val_f1"] == pytest.approx(best.max())
    assert condensed.provenance["repeat"] == int(best.idxmax())


def test_invalid_schedule_is_rejected():
    with pytest.raises(ConfigurationError):
        CondenseConfig(epochs=10, tau1=8, tau2=4).validate()


@pytest.fixture
def condenser(small_sbm):
    cfg = tiny_config(hidden_units=4)
    split = make_edge_split(small_sbm, seed=0)
    budget = budget_from_rate(small_sbm, cfg.reduction_rate, cfg.rate_basis)
    initial = init_condensed(small_sbm, budget, select(small_sbm.with_edges(split.train_pos), budget))
    return Condenser(small_sbm, split, cfg, budget, initial)


@pytest.fixture
def smooth_net():
    # a large shift keeps every hidden unit positive, so ReLU kinks stay out of the difference stencil
    net = HyperbolicStructureNet(8, hidden_units=4, num_layers=1, rng=np.random.default_rng(0))
    net.params["beta0"][:] = 5.0
    net.params["b_out"][:] = -5.0 * net.params["w_out"].sum()
    return net


def test_epoch_loss_gradient_wrt_features(condenser, smooth_net):
    sgc = SgcModel(8, 3, hidden_units=4, layers=2, rng=np.random.default_rng(1))
    samples = condenser.sample(np.random.default_rng(2))

    def loss(x):
        return condenser.epoch_loss(0, sgc, smooth_net, x, None, samples, 0.3)[0]

    report = check_gradients(loss, condenser.initial.features)

    assert report.passed, report


@pytest.mark.parametrize("name", ["W0", "gamma0", "w_out"])
def test_epoch_loss_gradient_wrt_structure_net(condenser, smooth_net, name):
    sgc = SgcModel(8, 3, hidden_units=4, layers=2, rng=np.random.default_rng(1))
    samples = condenser.sample(np.random.default_rng(2))
    features = Tensor(np.array(condenser.initial.features, dtype=np.float64))

    def loss(weight):
        params = {key: Tensor(value) for key, value in smooth_net.params.items()}
        params[name] = weight
        return condenser.epoch_loss(0, sgc, smooth_net, features, params, samples, 0.3)[0]

    report = check_gradients(loss, smooth_net.params[name])

    assert report.passed, report


def test_condensed_adjacency_is_the_eval_mode_net_output(small_sbm):
    condensed = condense(small_sbm, tiny_config())

    expected = condensed.net.adjacency(condensed.features, training=False).value

    np.testing.assert_allclose(condensed.adjacency_matrix(), expected, atol=1e-12)


def test_saved_artifacts_are_byte_identical(small_sbm, tmp_path):
    save_condensed(condense(small_sbm, tiny_config()), tmp_path / "first")
    save_condensed(condense(small_sbm, tiny_config()), tmp_path / "second")

    first = sorted(p.relative_to(tmp_path / "first") for p in (tmp_path / "first").rglob("*") if p.is_file())
    second = sorted(p.relative_to(tmp_path / "second") for p in (tmp_path / "second").rglob("*") if p.is_file())

    assert first == second
    assert len(first) >= 7
    for name in first:
        assert (tmp_path / "first" / name).read_bytes() == (tmp_path / "second" / name).read_bytes()
