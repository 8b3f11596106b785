import numpy as np


class Optimizer:
    """Base class for optimizers over a dict of named numpy parameters."""

    def __init__(self, params, lr):
        self.params = params
        self.lr = lr

    def step(self, grads):
        """Applies one update in place. Re-defined in all sub-classes."""
        raise NotImplementedError


class SGD(Optimizer):
    """Gradient descent with optional momentum and L2 weight decay."""

    def __init__(self, params, lr, momentum=0.0, weight_decay=0.0):
        super().__init__(params, lr)
        self.momentum = momentum
        self.weight_decay = weight_decay
        self.buffers = {name: np.zeros_like(value) for name, value in params.items()}

    def direction(self, name, grad):
        grad = grad + self.weight_decay * self.params[name] if self.weight_decay else grad
        if self.momentum:
            self.buffers[name] = self.momentum * self.buffers[name] + grad
            return self.buffers[name]
        return grad

    def step(self, grads):
        for name, grad in grads.items():
            self.params[name] -= self.lr * self.direction(name, grad)


class Adam(Optimizer):
    def __init__(self, params, lr=0.001, betas=(0.9, 0.999), eps=1e-8, weight_decay=0.0):
        super().__init__(params, lr)
        self.betas = betas
        self.eps = eps
        self.weight_decay = weight_decay
        self.t = 0
        self.m = {name: np.zeros_like(value) for name, value in params.items()}
        self.v = {name: np.zeros_like(value) for name, value in params.items()}

    def step(self, grads):
        self.t += 1
        beta1, beta2 = self.betas
        for name, grad in grads.items():
            if self.weight_decay:
                grad = grad + self.weight_decay * self.params[name]
            self.m[name] = beta1 * self.m[name] + (1 - beta1) * grad
            self.v[name] = beta2 * self.v[name] + (1 - beta2) * grad * grad
            m_hat = self.m[name] / (1 - beta1**self.t)
            v_hat = self.v[name] / (1 - beta2**self.t)
            self.params[name] -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)
