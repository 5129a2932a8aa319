"""Plain SGD, momentum SGD and Adam over a model's parameter list."""
import numpy as np

from ..errors import ValidationError


def clip_grad_norm(grads, max_norm):
    """Scale gradients in place so their global L2 norm is at most ``max_norm``."""
    total = float(np.sqrt(sum(float(np.sum(g.astype(np.float64) ** 2)) for g in grads)))
    if max_norm is not None and total > max_norm:
        scale = max_norm / total
        for g in grads:
            g *= scale
    return total


class SGD:
    def __init__(self, lr):
        self.lr = lr

    def step(self, model, grads):
        for p, g in zip(model.params(), grads):
            p -= self.lr * g
        model.mark_updated()


class MomentumSGD:
    def __init__(self, lr, momentum=0.9):
        self.lr, self.momentum = lr, momentum
        self.velocity = None

    def step(self, model, grads):
        params = model.params()
        if self.velocity is None:
            self.velocity = [np.zeros_like(p) for p in params]
        for p, g, v in zip(params, grads, self.velocity):
            v *= self.momentum
            v += g
            p -= self.lr * v
        model.mark_updated()


class Adam:
    def __init__(self, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.t = 0
        self.m = self.v = None

    def step(self, model, grads):
        params = model.params()
        if self.m is None:
            self.m = [np.zeros_like(p) for p in params]
            self.v = [np.zeros_like(p) for p in params]
        self.t += 1
        c1 = 1 - self.beta1 ** self.t
        c2 = 1 - self.beta2 ** self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.beta1
            m += (1 - self.beta1) * g
            v *= self.beta2
            v += (1 - self.beta2) * g * g
            p -= (self.lr / c1) * m / (np.sqrt(v / c2) + self.eps)
        model.mark_updated()


OPTIMIZERS = {"sgd": SGD, "momentum": MomentumSGD, "adam": Adam}


def make_optimizer(name, lr):
    try:
        return OPTIMIZERS[name](lr)
    except KeyError:
        raise ValidationError(f"unknown optimizer {name!r}; choose from {sorted(OPTIMIZERS)}") from None
