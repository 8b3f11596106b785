import logging

import numpy as np

from .exceptions import ConfigurationError, NumericalError, ValidationError
from .graphs import SynthAdjacency
from .numerics import SGD, Tensor, ops

log = logging.getLogger(__name__)

SAFE_MARGIN = 1e-7
MIN_NORM = 1e-12
BN_EPS = 1e-5
BN_MOMENTUM = 0.1


class PoincareBall:
    """
    The Poincare ball of curvature ``curvature`` < 0.

    All maps accept Tensors or arrays of shape (..., d), work row-wise along the
    last axis and record on the tape when their inputs do.

    Attributes:
        curvature (float): The negative curvature kappa.
        c (float): |kappa|.
        radius (float): The ball radius 1 / sqrt(c).
        max_norm (float): The safe radius (1 - 1e-7) / sqrt(c).
    """

    def __init__(self, curvature=-0.1):
        if not curvature < 0:
            raise ConfigurationError(f"Curvature must be negative, got {curvature}")
        self.curvature = float(curvature)
        self.c = -self.curvature
        self.sqrt_c = float(np.sqrt(self.c))
        self.radius = 1.0 / self.sqrt_c
        self.max_norm = (1.0 - SAFE_MARGIN) / self.sqrt_c

    def __repr__(self):
        return f"PoincareBall(curvature={self.curvature})"

    def contains(self, x):
        norms = np.linalg.norm(ops.value_of(x), axis=-1)
        return bool(np.all(norms * self.sqrt_c < 1.0 - SAFE_MARGIN + 1e-12))

    def project(self, x):
        """Pulls points outside the safe radius back onto it."""
        n = ops.norm(x, min_norm=MIN_NORM)
        factor = ops.clip(ops.div(self.max_norm, n), hi=1.0)
        return ops.mul(x, factor)

    def expmap0(self, u):
        n = ops.norm(u, min_norm=MIN_NORM)
        scaled = ops.mul(n, self.sqrt_c)
        return ops.mul(u, ops.div(ops.tanh(scaled), scaled))

    def logmap0(self, y):
        n = ops.norm(y, min_norm=MIN_NORM)
        scaled = ops.clip(ops.mul(n, self.sqrt_c), hi=1.0 - SAFE_MARGIN)
        return ops.mul(y, ops.div(ops.artanh(scaled), ops.mul(n, self.sqrt_c)))

    def mobius_add(self, x, y):
        c = self.c
        xy = ops.sum(ops.mul(x, y), axis=-1, keepdims=True)
        x2 = ops.sum(ops.mul(x, x), axis=-1, keepdims=True)
        y2 = ops.sum(ops.mul(y, y), axis=-1, keepdims=True)
        first = ops.add(ops.add(1.0, ops.mul(2.0 * c, xy)), ops.mul(c, y2))
        second = ops.sub(1.0, ops.mul(c, x2))
        numerator = ops.add(ops.mul(first, x), ops.mul(second, y))
        denominator = ops.add(ops.add(1.0, ops.mul(2.0 * c, xy)), ops.mul(c * c, ops.mul(x2, y2)))
        return ops.div(numerator, denominator)

    def mobius_matvec(self, x, weight):
        """Row-vector Mobius matrix multiplication expmap0(logmap0(x) @ weight)."""
        return self.expmap0(ops.matmul(self.logmap0(x), weight))

    def lambda_x(self, x):
        x2 = ops.sum(ops.mul(x, x), axis=-1, keepdims=True)
        return ops.div(2.0, ops.sub(1.0, ops.mul(self.c, x2)))

    def expmap(self, x, u):
        """Exponential map at ``x``."""
        n = ops.norm(u, min_norm=MIN_NORM)
        scaled = ops.mul(n, self.sqrt_c)
        step = ops.mul(u, ops.div(ops.tanh(ops.mul(0.5, ops.mul(self.lambda_x(x), scaled))), scaled))
        return self.mobius_add(x, step)

    def egrad2rgrad(self, x, grad):
        """Rescales a Euclidean gradient by the inverse squared conformal factor."""
        x = np.asarray(ops.value_of(x))
        factor = (1.0 - self.c * np.sum(x * x, axis=-1, keepdims=True)) ** 2 / 4.0
        return factor * np.asarray(grad)


class PoincarePoint:
    """A point strictly inside the ball of curvature ``curvature``."""

    coords: np.ndarray
    curvature: float

    def __init__(self, coords, curvature):
        self.coords = np.asarray(coords, dtype=np.float64)
        self.curvature = float(curvature)
        if not self.curvature < 0:
            raise ValidationError(f"Curvature must be negative, got {curvature}")
        if not np.all(np.isfinite(self.coords)):
            raise ValidationError("Point has non-finite coordinates")
        if self.norm * np.sqrt(-self.curvature) >= 1.0 - SAFE_MARGIN + 1e-12:
            raise ValidationError(f"Point with norm {self.norm} lies outside the safe radius")

    @property
    def norm(self):
        return float(np.linalg.norm(self.coords))

    @property
    def ball(self):
        return PoincareBall(self.curvature)

    def __repr__(self):
        return f"PoincarePoint(norm={self.norm:.6g}, curvature={self.curvature})"


def exp_map_origin(x, curvature=-0.1):
    """
    Maps a tangent vector at the origin into the ball.

    Vectors with norm below 1e-12 map to the origin.

    Returns:
        PoincarePoint
    """
    ball = PoincareBall(curvature)
    x = np.asarray(x, dtype=np.float64)
    if np.linalg.norm(x) < MIN_NORM:
        return PoincarePoint(np.zeros_like(x), curvature)
    return PoincarePoint(ball.project(ball.expmap0(x)).value, curvature)


def mobius_linear(p, weight, bias):
    """
    Mobius linear transformation ``(p (x) W) (+) b``, projected into the ball.

    Args:
        p (PoincarePoint): Input point of dimension d_in.
        weight (np.ndarray): (d_in, d_out) matrix.
        bias (PoincarePoint): Bias point of dimension d_out.

    Returns:
        PoincarePoint
    """
    ball = p.ball
    weight = np.asarray(weight, dtype=np.float64)
    if weight.shape[0] != p.coords.shape[-1] or weight.shape[1] != bias.coords.shape[-1]:
        raise ValidationError(f"Weight shape {weight.shape} does not fit {p.coords.shape} -> {bias.coords.shape}")
    x = ball.project(p.coords.reshape(1, -1))
    out = ball.project(ball.mobius_add(ball.mobius_matvec(x, weight), bias.coords))
    return PoincarePoint(out.value.reshape(-1), p.curvature)


def hyperbolic_relu(p):
    """ReLU applied in the tangent space at the origin."""
    ball = p.ball
    tangent = ball.logmap0(ball.project(p.coords))
    return PoincarePoint(ball.project(ball.expmap0(ops.relu(tangent))).value, p.curvature)


def pair_index(n):
    """Row and column ids of all ordered pairs i != j, row-major."""
    rows, cols = np.nonzero(~np.eye(n, dtype=bool))
    return rows, cols


class HyperbolicStructureNet:
    """
    The edge-weight network f_hyp.

    Node features are embedded with the exponential map at the origin, every
    ordered pair (i, j) is represented by the concatenation [h_i; h_j] and passed
    through ``num_layers`` hidden layers (Mobius linear, hyperbolic batch norm,
    hyperbolic ReLU) and a scalar readout in the tangent space at the origin.
    The symmetrized sigmoid of the pair scores is the synthetic adjacency.

    Attributes:
        in_features (int): Node feature dimension F (pairs have 2F).
        hidden_units (int): Width of every hidden layer.
        num_layers (int): Number of hidden layers.
        ball (PoincareBall): The manifold.
        batch_norm (bool): Whether hidden layers normalize over the pair batch.
        params (dict): Named parameter arrays; ``b{l}`` are ball points.
        buffers (dict): Running normalization statistics.
    """

    def __init__(self, in_features, hidden_units=256, num_layers=2, curvature=-0.1, batch_norm=True, rng=None):
        self.in_features = int(in_features)
        self.hidden_units = int(hidden_units)
        self.num_layers = int(num_layers)
        self.ball = PoincareBall(curvature)
        self.batch_norm = bool(batch_norm)
        self.params = {}
        self.buffers = {}
        if rng is not None:
            self.reset_parameters(rng)

    @property
    def curvature(self):
        return self.ball.curvature

    def manifold_params(self):
        return {f"b{layer}" for layer in range(self.num_layers)}

    def reset_parameters(self, rng):
        """Uniform weights scaled by 1/sqrt(fan_in), biases at the origin."""
        fan_in = 2 * self.in_features
        for layer in range(self.num_layers):
            bound = 1.0 / np.sqrt(fan_in)
            self.params[f"W{layer}"] = rng.uniform(-bound, bound, size=(fan_in, self.hidden_units))
            self.params[f"b{layer}"] = np.zeros(self.hidden_units)
            self.params[f"gamma{layer}"] = np.ones(self.hidden_units)
            self.params[f"beta{layer}"] = np.zeros(self.hidden_units)
            self.buffers[f"running_mean{layer}"] = np.zeros(self.hidden_units)
            self.buffers[f"running_var{layer}"] = np.ones(self.hidden_units)
            fan_in = self.hidden_units
        bound = 1.0 / np.sqrt(fan_in)
        self.params["w_out"] = rng.uniform(-bound, bound, size=(fan_in, 1))
        self.params["b_out"] = np.zeros(1)

    def bind(self, tape):
        """Registers every parameter as a variable of ``tape``."""
        return {name: tape.variable(value, name=name) for name, value in self.params.items()}

    def _first_layer(self, features, weight, n):
        # logmap0 of [h_i; h_j] scales both halves by one factor, so the
        # pair product splits into per-node products.
        ball = self.ball
        h = ball.project(ball.expmap0(features))
        sq = ops.sum(ops.mul(h, h), axis=1)
        rows, cols = pair_index(n)
        pair_norm = ops.sqrt(ops.clip(ops.add(ops.take(sq, rows), ops.take(sq, cols)), lo=MIN_NORM**2))
        scaled = ops.mul(pair_norm, ball.sqrt_c)
        factor = ops.div(ops.artanh(ops.clip(scaled, hi=1.0 - SAFE_MARGIN)), scaled)
        top = ops.matmul(h, ops.take(weight, slice(0, self.in_features), axis=0))
        bottom = ops.matmul(h, ops.take(weight, slice(self.in_features, 2 * self.in_features), axis=0))
        tangent = ops.add(ops.take(top, rows), ops.take(bottom, cols))
        return ops.mul(tangent, ops.reshape(factor, (-1, 1)))

    def _batch_norm(self, point, layer, params, training, update_stats):
        ball = self.ball
        tangent = ball.logmap0(point)
        if training:
            mean = ops.mean(tangent, axis=0, keepdims=True)
            centered = ops.sub(tangent, mean)
            var = ops.mean(ops.mul(centered, centered), axis=0, keepdims=True)
            if update_stats:
                self.buffers[f"running_mean{layer}"] = (
                    (1 - BN_MOMENTUM) * self.buffers[f"running_mean{layer}"] + BN_MOMENTUM * mean.value.ravel()
                )
                self.buffers[f"running_var{layer}"] = (
                    (1 - BN_MOMENTUM) * self.buffers[f"running_var{layer}"] + BN_MOMENTUM * var.value.ravel()
                )
        else:
            centered = ops.sub(tangent, self.buffers[f"running_mean{layer}"])
            var = self.buffers[f"running_var{layer}"]
        normalized = ops.div(centered, ops.sqrt(ops.add(var, BN_EPS)))
        shifted = ops.add(ops.mul(normalized, params[f"gamma{layer}"]), params[f"beta{layer}"])
        return ball.project(ball.expmap0(shifted))

    def _check(self, value, layer, stage, trace):
        values = ops.value_of(value)
        if not np.all(np.isfinite(values)):
            raise NumericalError(f"Non-finite activation after {stage} in layer {layer}", layer=layer)
        if trace is not None:
            trace(layer, stage, values)

    def pair_scores(self, features, params=None, training=True, update_stats=False, trace=None):
        """
        Raw scores f_hyp(e_ij) for all ordered pairs i != j.

        Args:
            features (Tensor or array): Node features X' (n x F).
            params (dict, optional): Tensors from ``bind``; defaults to constants.
            training (bool): Normalize with batch statistics instead of running ones.
            update_stats (bool): Fold the batch statistics into the running ones.
            trace (callable, optional): Called as trace(layer, stage, array) after
                every stage, for instrumented forward passes.

        Returns:
            Tensor: (n * (n - 1), 1) scores in ``pair_index`` order.

        Raises:
            NumericalError: On a non-finite activation, naming the layer.
        """
        params = params if params is not None else {k: Tensor(v) for k, v in self.params.items()}
        ball = self.ball
        n = ops.value_of(features).shape[0]

        tangent = self._first_layer(features, params["W0"], n)
        point = None
        for layer in range(self.num_layers):
            if layer > 0:
                tangent = ops.matmul(ball.logmap0(point), params[f"W{layer}"])
            point = ball.project(ball.mobius_add(ball.expmap0(tangent), params[f"b{layer}"]))
            self._check(point, layer, "mobius_linear", trace)
            if self.batch_norm:
                point = self._batch_norm(point, layer, params, training, update_stats)
                self._check(point, layer, "batch_norm", trace)
            point = ball.project(ball.expmap0(ops.relu(ball.logmap0(point))))
            self._check(point, layer, "relu", trace)

        scores = ops.add(ops.matmul(ball.logmap0(point), params["w_out"]), params["b_out"])
        self._check(scores, self.num_layers, "readout", trace)
        return scores

    def adjacency(self, features, params=None, training=True, update_stats=False, trace=None):
        """
        The synthetic adjacency sigmoid((M + M^T) / 2) with a zero diagonal, as a Tensor.
        """
        n = ops.value_of(features).shape[0]
        if n < 2:
            raise ValidationError(f"Synthetic adjacency needs at least 2 nodes, got {n}")
        scores = self.pair_scores(features, params, training, update_stats, trace)
        rows, cols = pair_index(n)
        matrix = ops.reshape(ops.scatter(scores, rows * n + cols, n * n), (n, n))
        symmetric = ops.mul(0.5, ops.add(matrix, ops.transpose(matrix)))
        return ops.mul(ops.sigmoid(symmetric), 1.0 - np.eye(n))

    def state(self):
        """Parameters, buffers and the shape metadata needed to rebuild the net."""
        meta = {
            "in_features": self.in_features,
            "hidden_units": self.hidden_units,
            "num_layers": self.num_layers,
            "curvature": self.curvature,
            "batch_norm": self.batch_norm,
            "arrays": [[name, list(value.shape)] for name, value in self.ordered_arrays()],
        }
        return meta, dict(self.ordered_arrays())

    def ordered_arrays(self):
        return [(name, self.params[name]) for name in sorted(self.params)] + [
            (name, self.buffers[name]) for name in sorted(self.buffers)
        ]

    @staticmethod
    def from_state(meta, arrays):
        net = HyperbolicStructureNet(
            meta["in_features"],
            hidden_units=meta["hidden_units"],
            num_layers=meta["num_layers"],
            curvature=meta["curvature"],
            batch_norm=meta["batch_norm"],
        )
        for name, value in arrays.items():
            target = net.buffers if name.startswith("running_") else net.params
            target[name] = np.array(value, dtype=np.float64)
        return net


def synth_adjacency(features, net, trace=None, training=False):
    """
    Evaluates the structure net on X' and returns the synthetic adjacency.

    Hidden layers normalize with the running statistics unless ``training`` is set.

    Returns:
        SynthAdjacency
    """
    features = np.asarray(features, dtype=np.float64)
    if not np.all(np.isfinite(features)):
        raise ValidationError("Features contain non-finite values")
    weights = net.adjacency(features, training=training, trace=trace).value
    return SynthAdjacency(weights)


class RiemannianSGD(SGD):
    """
    SGD over mixed Euclidean and ball parameters.

    Euclidean parameters take momentum steps with weight decay. Ball parameters
    take Riemannian steps: the gradient is rescaled by the inverse squared
    conformal factor, followed by the exponential map at the point and a
    projection to the safe radius. The momentum buffer of a ball parameter is not
    parallel-transported between steps.
    """

    def __init__(self, params, lr, ball, manifold_params=(), momentum=0.9, weight_decay=5e-4):
        super().__init__(params, lr, momentum=momentum, weight_decay=weight_decay)
        self.ball = ball
        self.manifold_params = set(manifold_params)

    def step(self, grads):
        for name, grad in grads.items():
            if name not in self.manifold_params:
                self.params[name] -= self.lr * self.direction(name, grad)
                continue
            point = self.params[name]
            rgrad = self.ball.egrad2rgrad(point, grad)
            if self.momentum:
                self.buffers[name] = self.momentum * self.buffers[name] + rgrad
                rgrad = self.buffers[name]
            moved = self.ball.project(self.ball.expmap(point, -self.lr * rgrad)).value
            self.params[name][...] = moved
