"""Differentiable primitives over Tensor values."""

import numpy as np

from .tape import Tensor, as_tensor, primitive


def _v(x):
    return x.value if isinstance(x, Tensor) else np.asarray(x, dtype=np.float64)


def add(a, b):
    return primitive("add", _v(a) + _v(b), (a, b), lambda g: (g, g))


def sub(a, b):
    return primitive("sub", _v(a) - _v(b), (a, b), lambda g: (g, -g))


def mul(a, b):
    av, bv = _v(a), _v(b)
    return primitive("mul", av * bv, (a, b), lambda g: (g * bv, g * av))


def div(a, b):
    av, bv = _v(a), _v(b)
    return primitive("div", av / bv, (a, b), lambda g: (g / bv, -g * av / (bv * bv)))


def neg(a):
    return primitive("neg", -_v(a), (a,), lambda g: (-g,))


def power(a, exponent):
    if isinstance(exponent, Tensor):
        raise TypeError("power only supports constant exponents")
    av = _v(a)
    return primitive("power", av**exponent, (a,), lambda g: (g * exponent * av ** (exponent - 1),))


def matmul(a, b):
    av, bv = _v(a), _v(b)
    if av.ndim != 2 or bv.ndim != 2:
        raise ValueError(f"matmul expects 2-d operands, got {av.shape} and {bv.shape}")
    return primitive("matmul", av @ bv, (a, b), lambda g: (g @ bv.T, av.T @ g))


def sparse_matmul(matrix, b):
    """Multiplies a constant scipy sparse matrix with a tensor."""
    bv = _v(b)
    return primitive("sparse_matmul", np.asarray(matrix @ bv), (b,), lambda g: (np.asarray(matrix.T @ g),))


def transpose(a):
    return primitive("transpose", _v(a).T, (a,), lambda g: (g.T,))


def reshape(a, shape):
    av = _v(a)
    return primitive("reshape", av.reshape(shape), (a,), lambda g: (g.reshape(av.shape),))


def _expand(g, shape, axis, keepdims):
    if axis is not None and not keepdims:
        g = np.expand_dims(g, axis)
    return np.broadcast_to(g, shape)


def sum(a, axis=None, keepdims=False):
    av = _v(a)
    return primitive(
        "sum",
        av.sum(axis=axis, keepdims=keepdims),
        (a,),
        lambda g: (_expand(g, av.shape, axis, keepdims).copy(),),
    )


def mean(a, axis=None, keepdims=False):
    av = _v(a)
    count = av.size if axis is None else av.shape[axis]
    return primitive(
        "mean",
        av.mean(axis=axis, keepdims=keepdims),
        (a,),
        lambda g: (_expand(g, av.shape, axis, keepdims) / count,),
    )


def exp(a):
    out = np.exp(_v(a))
    return primitive("exp", out, (a,), lambda g: (g * out,))


def log(a):
    av = _v(a)
    return primitive("log", np.log(av), (a,), lambda g: (g / av,))


def sqrt(a):
    out = np.sqrt(_v(a))
    return primitive("sqrt", out, (a,), lambda g: (g * 0.5 / out,))


def tanh(a):
    out = np.tanh(_v(a))
    return primitive("tanh", out, (a,), lambda g: (g * (1.0 - out * out),))


def artanh(a):
    av = _v(a)
    return primitive("artanh", np.arctanh(av), (a,), lambda g: (g / (1.0 - av * av),))


def _sigmoid(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def sigmoid(a):
    out = _sigmoid(np.atleast_1d(_v(a))).reshape(np.shape(_v(a)))
    return primitive("sigmoid", out, (a,), lambda g: (g * out * (1.0 - out),))


def relu(a):
    av = _v(a)
    mask = av > 0
    return primitive("relu", np.where(mask, av, 0.0), (a,), lambda g: (g * mask,))


def abs(a):
    av = _v(a)
    return primitive("abs", np.abs(av), (a,), lambda g: (g * np.sign(av),))


def clip(a, lo=None, hi=None):
    """Clamps values; the gradient is zero where a bound is active."""
    av = _v(a)
    out = np.clip(av, lo, hi)
    mask = np.ones_like(av, dtype=bool)
    if lo is not None:
        mask &= av >= lo
    if hi is not None:
        mask &= av <= hi
    return primitive("clip", out, (a,), lambda g: (g * mask,))


def floor(a):
    """
    Elementwise floor. Not differentiable: the forward value is exact, but
    backpropagating through it raises UnsupportedOperationError.
    """
    return primitive("floor", np.floor(_v(a)), (a,))


def norm(a, axis=-1, keepdims=True, min_norm=1e-15):
    """Euclidean norm along ``axis``, clamped below at ``min_norm``."""
    av = _v(a)
    raw = np.sqrt((av * av).sum(axis=axis, keepdims=True))
    clamped = np.maximum(raw, min_norm)
    active = raw > min_norm
    out = clamped if keepdims else np.squeeze(clamped, axis=axis)

    def backward(g):
        if not keepdims:
            g = np.expand_dims(g, axis)
        return (g * np.where(active, av / clamped, 0.0),)

    return primitive("norm", out, (a,), backward)


def take(a, index, axis=0):
    av = _v(a)
    index = np.asarray(index) if not isinstance(index, (slice, tuple)) else index
    if isinstance(index, tuple):
        out = av[index]

        def backward(g):
            grad = np.zeros_like(av)
            np.add.at(grad, index, g)
            return (grad,)

        return primitive("take", out, (a,), backward)

    out = np.take(av, index, axis=axis) if not isinstance(index, slice) else av[(slice(None),) * axis + (index,)]

    def backward(g):
        grad = np.zeros_like(av)
        if isinstance(index, slice):
            grad[(slice(None),) * axis + (index,)] += g
        else:
            np.add.at(grad, (slice(None),) * axis + (index,), g)
        return (grad,)

    return primitive("take", out, (a,), backward)


def concat(tensors, axis=0):
    values = [_v(t) for t in tensors]
    sizes = [v.shape[axis] for v in values]
    bounds = np.cumsum([0] + sizes)

    def backward(g):
        return tuple(
            np.take(g, np.arange(bounds[i], bounds[i + 1]), axis=axis) for i in range(len(values))
        )

    return primitive("concat", np.concatenate(values, axis=axis), tuple(tensors), backward)


def scatter(values, flat_index, size):
    """Writes ``values`` into a zero buffer of length ``size`` at ``flat_index``."""
    vv = _v(values).reshape(-1)
    flat_index = np.asarray(flat_index)
    out = np.zeros(size)
    np.add.at(out, flat_index, vv)
    shape = _v(values).shape
    return primitive("scatter", out, (values,), lambda g: (g[flat_index].reshape(shape),))


def _softmax(x, axis):
    shifted = x - x.max(axis=axis, keepdims=True)
    ex = np.exp(shifted)
    return ex / ex.sum(axis=axis, keepdims=True)


def softmax(a, axis=-1):
    out = _softmax(_v(a), axis)

    def backward(g):
        return (out * (g - (g * out).sum(axis=axis, keepdims=True)),)

    return primitive("softmax", out, (a,), backward)


def softmax_cross_entropy(logits, labels):
    """Mean cross-entropy of row-wise softmax against integer labels."""
    lv = _v(logits)
    labels = np.asarray(labels, dtype=np.int64)
    rows = np.arange(lv.shape[0])
    shifted = lv - lv.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=1))
    loss = float(np.mean(log_norm - shifted[rows, labels]))

    def backward(g):
        grad = _softmax(lv, 1)
        grad[rows, labels] -= 1.0
        return (g * grad / lv.shape[0],)

    return primitive("softmax_cross_entropy", loss, (logits,), backward)


def binary_cross_entropy_with_logits(logits, targets):
    lv = _v(logits)
    tv = np.asarray(targets, dtype=np.float64)
    loss = float(np.mean(np.maximum(lv, 0.0) - lv * tv + np.log1p(np.exp(-np.abs(lv)))))

    def backward(g):
        return (g * (_sigmoid(np.atleast_1d(lv)).reshape(lv.shape) - tv) / lv.size,)

    return primitive("bce_with_logits", loss, (logits,), backward)


def one_hot(labels, num_classes):
    labels = np.asarray(labels, dtype=np.int64)
    out = np.zeros((labels.size, num_classes))
    out[np.arange(labels.size), labels] = 1.0
    return out


def value_of(x):
    return _v(as_tensor(x))
