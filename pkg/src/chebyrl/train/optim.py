"""Minimal first-order optimizers over flat coefficient vectors.

All steps are descent steps (pass the gradient of the loss).  Update rules are
the standard published ones; Adam/AdamW use betas (0.9, 0.999) and eps 1e-8,
AdamW applies decoupled weight decay.
"""

from __future__ import annotations

import numpy as np

from ..errors import ConfigError


class Sgd:
    def __init__(self, lr: float, weight_decay: float = 0.0):
        self.lr = lr
        self.weight_decay = weight_decay

    def step(self, params: np.ndarray, grad: np.ndarray) -> None:
        if self.weight_decay:
            grad = grad + self.weight_decay * params
        params -= self.lr * grad


class Adam:
    decoupled = False

    def __init__(self, lr: float, weight_decay: float = 0.0, betas=(0.9, 0.999), eps=1e-8):
        self.lr = lr
        self.weight_decay = weight_decay
        self.b1, self.b2 = betas
        self.eps = eps
        self.t = 0
        self.m = None
        self.v = None

    def step(self, params: np.ndarray, grad: np.ndarray) -> None:
        if self.m is None:
            self.m = np.zeros_like(params)
            self.v = np.zeros_like(params)
        if self.weight_decay and not self.decoupled:
            grad = grad + self.weight_decay * params
        self.t += 1
        self.m = self.b1 * self.m + (1.0 - self.b1) * grad
        self.v = self.b2 * self.v + (1.0 - self.b2) * grad * grad
        m_hat = self.m / (1.0 - self.b1**self.t)
        v_hat = self.v / (1.0 - self.b2**self.t)
        if self.decoupled and self.weight_decay:
            params -= self.lr * self.weight_decay * params
        params -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


class AdamW(Adam):
    decoupled = True

    def __init__(self, lr: float, weight_decay: float = 0.01, betas=(0.9, 0.999), eps=1e-8):
        super().__init__(lr, weight_decay, betas, eps)


class RmsProp:
    def __init__(self, lr: float, weight_decay: float = 0.0, alpha: float = 0.99, eps=1e-8):
        self.lr = lr
        self.weight_decay = weight_decay
        self.alpha = alpha
        self.eps = eps
        self.sq = None

    def step(self, params: np.ndarray, grad: np.ndarray) -> None:
        if self.sq is None:
            self.sq = np.zeros_like(params)
        if self.weight_decay:
            grad = grad + self.weight_decay * params
        self.sq = self.alpha * self.sq + (1.0 - self.alpha) * grad * grad
        params -= self.lr * grad / (np.sqrt(self.sq) + self.eps)


_OPTIMIZERS = {"sgd": Sgd, "adam": Adam, "adamw": AdamW, "rmsprop": RmsProp}


def make_optimizer(name: str, lr: float, weight_decay: float = 0.0):
    if lr <= 0.0:
        raise ConfigError("step size must be positive")
    cls = _OPTIMIZERS.get(name.lower())
    if cls is None:
        raise ConfigError(
            f"unknown optimizer '{name}' (choose from {sorted(_OPTIMIZERS)})"
        )
    return cls(lr, weight_decay)
