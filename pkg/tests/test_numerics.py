import numpy as np
import pytest

from pyhydro.exceptions import DomainError, UnsupportedOperationError
from pyhydro.numerics import (
    SGD,
    Adam,
    Rng,
    Tape,
    Tensor,
    check_gradients,
    normalize_symmetric,
    ops,
    primitive,
    second_largest_eigenvalue_diff,
)


def test_backward_accumulates_shared_inputs():
    tape = Tape()
    x = tape.variable([1.0, 2.0, 3.0])

    loss = ops.sum(ops.add(ops.mul(x, x), x))
    grads = tape.backward(loss)

    np.testing.assert_allclose(grads[x], [3.0, 5.0, 7.0])
    assert len(tape) == 0


def test_backward_unbroadcasts_bias():
    tape = Tape()
    weight = tape.variable(np.ones((2, 3)))
    bias = tape.variable(np.zeros(3))

    loss = ops.sum(ops.add(ops.matmul(np.ones((4, 2)), weight), bias))
    grads = tape.backward(loss)

    np.testing.assert_allclose(grads[bias], [4.0, 4.0, 4.0])
    np.testing.assert_allclose(grads[weight], np.full((2, 3), 4.0))


def test_constant_loss_gives_zero_gradients():
    tape = Tape()
    x = tape.variable([1.0, 2.0])

    grads = tape.backward(Tensor(3.0))

    np.testing.assert_array_equal(grads[x], [0.0, 0.0])


def test_floor_forward_value_is_exact():
    out = ops.floor(Tensor([-1.5, 0.0, 2.7]))

    np.testing.assert_array_equal(out.value, [-2.0, 0.0, 2.0])


def test_primitive_without_backward_rule_raises():
    tape = Tape()
    x = tape.variable([0.5, 1.5])

    with pytest.raises(UnsupportedOperationError, match="floor"):
        tape.backward(ops.sum(ops.floor(x)))


@pytest.mark.parametrize(
    "f",
    [
        lambda t: ops.sum(ops.mul(ops.tanh(t), t)),
        lambda t: ops.sum(ops.log(ops.add(ops.exp(t), 1.0))),
        lambda t: ops.norm(ops.reshape(t, (-1,)), keepdims=False),
        lambda t: ops.sum(ops.softmax(ops.reshape(t, (2, 3)), axis=1) * np.arange(6.0).reshape(2, 3)),
        lambda t: ops.softmax_cross_entropy(ops.reshape(t, (3, 2)), [0, 1, 1]),
        lambda t: ops.binary_cross_entropy_with_logits(t, [1.0, 0.0, 1.0, 0.0, 1.0, 0.0]),
        lambda t: ops.sum(ops.artanh(ops.mul(t, 0.3))),
        lambda t: ops.sum(ops.sqrt(ops.add(ops.mul(t, t), 1.0))),
    ],
)
def test_primitives_match_finite_differences(f):
    theta = np.random.default_rng(0).normal(size=6)

    report = check_gradients(f, theta)

    assert report.passed, report


def test_gradient_check_detects_wrong_backward_rule():
    def bad_square(a):
        value = ops.value_of(a)
        # the correct rule is 2 * x
        return primitive("bad_square", value**2, (a,), lambda g: (g * value,))

    report = check_gradients(lambda t: ops.sum(bad_square(t)), np.array([1.0, -2.0, 3.0]))

    assert not report.passed
    assert report.failures


def test_normalize_symmetric_matches_dense_formula():
    adjacency = np.array([[0.0, 0.5, 0.2], [0.5, 0.0, 0.9], [0.2, 0.9, 0.0]])
    degree = adjacency.sum(axis=1)

    normalized = normalize_symmetric(adjacency).value

    np.testing.assert_allclose(normalized, adjacency / np.sqrt(np.outer(degree, degree)))


def test_second_eigenvalue_of_triangle():
    adjacency = np.ones((3, 3)) - np.eye(3)

    assert second_largest_eigenvalue_diff(adjacency).item() == pytest.approx(-0.5)


def test_second_eigenvalue_needs_two_nodes():
    with pytest.raises(DomainError):
        second_largest_eigenvalue_diff(np.zeros((1, 1)))


def test_second_eigenvalue_gradient_matches_finite_differences():
    rng = np.random.default_rng(4)
    theta = rng.uniform(0.2, 1.0, size=(5, 5))

    def f(t):
        symmetric = ops.mul(0.5, ops.add(t, ops.transpose(t)))
        return second_largest_eigenvalue_diff(ops.mul(symmetric, 1.0 - np.eye(5)))

    report = check_gradients(f, theta)

    assert report.passed, report


def test_rng_streams_are_stable_and_independent():
    rng = Rng(7)

    first = rng.stream("init").normal(size=4)
    again = rng.stream("init").normal(size=4)
    other = rng.stream("sample").normal(size=4)

    np.testing.assert_array_equal(first, again)
    assert not np.allclose(first, other)
    assert Rng(7).child("repeat-1").seed == rng.child("repeat-1").seed
    assert Rng(8).child("repeat-1").seed != rng.child("repeat-1").seed


def test_sgd_momentum_and_weight_decay():
    params = {"w": np.array([1.0])}
    optimizer = SGD(params, lr=0.1, momentum=0.5, weight_decay=0.1)

    optimizer.step({"w": np.array([1.0])})
    np.testing.assert_allclose(params["w"], [1.0 - 0.1 * 1.1])

    optimizer.step({"w": np.array([1.0])})
    expected_buffer = 0.5 * 1.1 + (1.0 + 0.1 * 0.89)
    np.testing.assert_allclose(params["w"], [0.89 - 0.1 * expected_buffer])


def test_adam_decreases_a_quadratic():
    params = {"w": np.array([3.0, -2.0])}
    optimizer = Adam(params, lr=0.1)

    for _ in range(200):
        optimizer.step({"w": 2.0 * params["w"]})

    assert np.abs(params["w"]).max() < 0.5
