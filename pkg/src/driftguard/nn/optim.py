"""Gradient-descent optimizers operating in place on parameter dicts."""

from __future__ import annotations

import numpy as np

from ..errors import ConfigError


class Sgd:
    """Plain gradient descent: p <- p - lr * g."""

    def __init__(self, learning_rate: float):
        if learning_rate <= 0.0:
            raise ConfigError("learning_rate must be positive")
        self.learning_rate = learning_rate

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        for name, p in params.items():
            p -= self.learning_rate * grads[name]


class Adam:
    """Adaptive-moment estimation with the usual decay constants."""

    def __init__(self, learning_rate: float,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        if learning_rate <= 0.0:
            raise ConfigError("learning_rate must be positive")
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        if not self.m:
            self.m = {k: np.zeros_like(p) for k, p in params.items()}
            self.v = {k: np.zeros_like(p) for k, p in params.items()}
        self.t += 1
        correct1 = 1.0 - self.beta1 ** self.t
        correct2 = 1.0 - self.beta2 ** self.t
        for name, p in params.items():
            g = grads[name]
            m = self.m[name]
            v = self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            p -= self.learning_rate * (m / correct1) / (np.sqrt(v / correct2) + self.eps)


def make_optimizer(kind: str, learning_rate: float):
    if kind == "sgd":
        return Sgd(learning_rate)
    if kind == "adam":
        return Adam(learning_rate)
    raise ConfigError(f"unknown optimizer {kind!r}")


def optimizer_step(params: dict[str, np.ndarray], grads: dict[str, np.ndarray],
                   kind: str, learning_rate: float, state=None):
    """One functional update step.

    Returns (params, state); params are updated in place.  The state
    returned by one call must be passed back into the next for adaptive
    optimizers.
    """
    if state is None:
        state = make_optimizer(kind, learning_rate)
    state.step(params, grads)
    return params, state
