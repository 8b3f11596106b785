import logging

import numpy as np

from ..exceptions import UnsupportedOperationError

log = logging.getLogger(__name__)


class Tensor:
    """
    A dense value, optionally recorded on a Tape.

    Tensors created outside a tape (or only from constants) carry no history and
    cost nothing beyond the numpy evaluation, so the same code path serves both
    differentiable and plain evaluation.

    Attributes:
        value (np.ndarray): The 64-bit value.
        tape (Tape or None): The tape this tensor is recorded on.
        parents (tuple): The tensors this one was computed from.
        backward_fn (callable or None): Maps the output gradient to parent gradients.
        op (str): The primitive name, "leaf" for variables and constants.
        requires_grad (bool): Whether gradients flow into this tensor.
    """

    __array_priority__ = 100

    def __init__(self, value, tape=None, parents=(), backward_fn=None, op="leaf", requires_grad=False, name=None):
        self.value = np.asarray(value, dtype=np.float64)
        self.tape = tape
        self.parents = parents
        self.backward_fn = backward_fn
        self.op = op
        self.requires_grad = requires_grad
        self.name = name

    @property
    def shape(self):
        return self.value.shape

    @property
    def ndim(self):
        return self.value.ndim

    @property
    def size(self):
        return self.value.size

    @property
    def T(self):
        from . import ops

        return ops.transpose(self)

    def item(self):
        return float(self.value)

    def numpy(self):
        return self.value

    def __repr__(self):
        label = f" name={self.name}" if self.name else ""
        return f"Tensor(op={self.op}{label}, shape={self.shape}, requires_grad={self.requires_grad})"

    def __add__(self, other):
        from . import ops

        return ops.add(self, other)

    def __radd__(self, other):
        from . import ops

        return ops.add(other, self)

    def __sub__(self, other):
        from . import ops

        return ops.sub(self, other)

    def __rsub__(self, other):
        from . import ops

        return ops.sub(other, self)

    def __mul__(self, other):
        from . import ops

        return ops.mul(self, other)

    def __rmul__(self, other):
        from . import ops

        return ops.mul(other, self)

    def __truediv__(self, other):
        from . import ops

        return ops.div(self, other)

    def __rtruediv__(self, other):
        from . import ops

        return ops.div(other, self)

    def __neg__(self):
        from . import ops

        return ops.neg(self)

    def __pow__(self, exponent):
        from . import ops

        return ops.power(self, exponent)

    def __matmul__(self, other):
        from . import ops

        return ops.matmul(self, other)

    def __rmatmul__(self, other):
        from . import ops

        return ops.matmul(other, self)

    def __getitem__(self, index):
        from . import ops

        return ops.take(self, index)

    def sum(self, axis=None, keepdims=False):
        from . import ops

        return ops.sum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        from . import ops

        return ops.mean(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape):
        from . import ops

        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return ops.reshape(self, shape)


def as_tensor(value):
    if isinstance(value, Tensor):
        return value
    return Tensor(value)


def unbroadcast(grad, shape):
    """Sums a broadcast gradient back down to ``shape``."""
    grad = np.asarray(grad, dtype=np.float64)
    if grad.shape == shape:
        return grad
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad.reshape(shape)


def primitive(op, value, parents, backward_fn=None):
    """
    Records a primitive operation.

    Args:
        op (str): The primitive name, used in error messages.
        value: The forward value.
        parents (sequence): The inputs, tensors or array-likes.
        backward_fn (callable, optional): Receives the output gradient and returns one
            gradient (or None) per parent. Primitives without a rule raise on backward.

    Returns:
        Tensor: The output, recorded on the parents' tape when any parent requires grad.
    """
    parents = tuple(as_tensor(p) for p in parents)
    tape = None
    for parent in parents:
        if parent.requires_grad and parent.tape is not None:
            tape = parent.tape
            break

    out = Tensor(value, op=op)
    if tape is None:
        return out

    out.tape = tape
    out.parents = parents
    out.backward_fn = backward_fn
    out.requires_grad = True
    tape.records.append(out)
    return out


class Tape:
    """
    An ordered record of primitive operations.

    Nodes are appended as they are computed, so every parent precedes its
    consumers and a reversed walk is a valid reverse topological order.
    """

    def __init__(self):
        self.records = []
        self.leaves = []

    def __len__(self):
        return len(self.records)

    def variable(self, value, name=None):
        """Creates a leaf tensor that receives a gradient."""
        leaf = Tensor(np.array(value, dtype=np.float64), tape=self, requires_grad=True, name=name)
        self.leaves.append(leaf)
        return leaf

    @staticmethod
    def constant(value, name=None):
        return Tensor(value, name=name)

    def release(self):
        self.records.clear()
        self.leaves.clear()

    def backward(self, loss, retain=False):
        """
        Runs the reverse pass from a scalar loss.

        Args:
            loss (Tensor): A scalar recorded on this tape.
            retain (bool): Keep the records after the pass. By default the tape is
                released so its memory does not grow across epochs.

        Returns:
            dict: Maps every variable of this tape to its gradient array.

        Raises:
            ValueError: If the loss is not a scalar on this tape.
            UnsupportedOperationError: If a primitive on the path has no backward rule.
        """
        if loss.size != 1:
            raise ValueError(f"backward needs a scalar loss, got shape {loss.shape}")

        leaves = list(self.leaves)
        if loss.tape is not self:
            if loss.requires_grad:
                raise ValueError("loss is recorded on a different tape")
            # constant loss, nothing depends on the variables
            result = {leaf: np.zeros_like(leaf.value) for leaf in leaves}
            if not retain:
                self.release()
            return result

        grads = {loss: np.ones_like(loss.value)}
        for node in reversed(self.records):
            grad = grads.pop(node, None)
            if grad is None:
                continue
            if node.backward_fn is None:
                raise UnsupportedOperationError(f"No backward rule for primitive '{node.op}'")
            parent_grads = node.backward_fn(grad)
            for parent, parent_grad in zip(node.parents, parent_grads):
                if parent_grad is None or not parent.requires_grad:
                    continue
                parent_grad = unbroadcast(parent_grad, parent.value.shape)
                if parent in grads:
                    grads[parent] = grads[parent] + parent_grad
                else:
                    grads[parent] = parent_grad

        result = {leaf: grads.get(leaf, np.zeros_like(leaf.value)) for leaf in leaves}
        log.debug(f"Backward pass over {len(self.records)} records, {len(leaves)} variables")
        if not retain:
            self.release()
        return result


def backward(tape, loss, retain=False):
    return tape.backward(loss, retain=retain)
