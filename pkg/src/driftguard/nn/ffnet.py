"""Variance network: a small feed-forward net that predicts log variance.

Input is a window of recent observations, the single hidden layer uses
tanh units, and the raw output is interpreted as ln(sigma^2).  The
predicted variance is exp(raw) + VAR_FLOOR; the additive floor keeps the
variance strictly positive while leaving the mapping smooth, so the
analytic gradients below remain exact.

Training minimizes the mean over the batch of the Gaussian negative
log-likelihood terms 0.5 * (r2_k / var_k + ln var_k), where the targets
r2_k are squared residuals.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError, InputError, NumericError

VAR_FLOOR = 1e-8


@dataclass
class VarianceNet:
    w1: np.ndarray   # (input_dim, hidden)
    b1: np.ndarray   # (hidden,)
    w2: np.ndarray   # (hidden,)
    b2: np.ndarray   # (1,)

    def __post_init__(self) -> None:
        h = self.hidden_dim
        if (self.w1.shape != (self.input_dim, h) or self.b1.shape != (h,)
                or self.w2.shape != (h,) or self.b2.shape != (1,)):
            raise ConfigError("VarianceNet parameter shapes are inconsistent")

    @property
    def input_dim(self) -> int:
        return self.w1.shape[0]

    @property
    def hidden_dim(self) -> int:
        return self.w1.shape[1]

    def param_arrays(self) -> dict[str, np.ndarray]:
        return {"w1": self.w1, "b1": self.b1, "w2": self.w2, "b2": self.b2}

    def copy(self) -> "VarianceNet":
        return VarianceNet(self.w1.copy(), self.b1.copy(),
                           self.w2.copy(), self.b2.copy())

    def _raw(self, x: np.ndarray):
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != self.input_dim:
            raise ConfigError(
                f"batch shape {x.shape} does not match input_dim={self.input_dim}"
            )
        z = np.tanh(x @ self.w1 + self.b1)
        return z @ self.w2 + self.b2[0], z

    def predict_variance(self, x: np.ndarray) -> np.ndarray:
        """Predicted noise variance for each row of x; always > 0."""
        raw, _ = self._raw(x)
        var = np.exp(raw) + VAR_FLOOR
        if not np.all(np.isfinite(var)):
            raise NumericError("variance net produced non-finite output")
        return var

    def predict_variance_one(self, window: np.ndarray) -> float:
        return float(self.predict_variance(np.asarray(window).reshape(1, -1))[0])

    def batch_loss(self, x: np.ndarray, r2: np.ndarray) -> float:
        """Mean negative log-likelihood of squared residuals r2."""
        r2 = np.asarray(r2, dtype=np.float64)
        if np.any(r2 < 0.0):
            raise InputError("squared residuals must be non-negative")
        var = self.predict_variance(x)
        return float(np.mean(0.5 * (r2 / var + np.log(var))))

    def batch_loss_and_grads(self, x: np.ndarray, r2: np.ndarray):
        r2 = np.asarray(r2, dtype=np.float64)
        if np.any(r2 < 0.0):
            raise InputError("squared residuals must be non-negative")
        raw, z = self._raw(x)
        ex = np.exp(raw)
        var = ex + VAR_FLOOR
        if not np.all(np.isfinite(var)):
            raise NumericError("variance net produced non-finite output")
        n = raw.size
        loss = float(np.mean(0.5 * (r2 / var + np.log(var))))
        # d/draw of the mean loss; dvar/draw = exp(raw).
        draw = 0.5 * (1.0 / var - r2 / (var * var)) * ex / n
        x = np.asarray(x, dtype=np.float64)
        grads = {
            "w2": z.T @ draw,
            "b2": np.array([draw.sum()]),
        }
        dz = draw[:, None] * self.w2[None, :]
        da = dz * (1.0 - z * z)
        grads["w1"] = x.T @ da
        grads["b1"] = da.sum(axis=0)
        for name, grad in grads.items():
            if not np.all(np.isfinite(grad)):
                raise NumericError(f"non-finite gradient for parameter {name!r}")
        return loss, grads


def init_variance_net(input_dim: int, hidden_dim: int, seed: int) -> VarianceNet:
    """Uniform [-1/sqrt(H), +1/sqrt(H)] weights, zero biases.

    A zero output bias starts the net at variance exp(0) = 1, a neutral
    scale for standardized data.
    """
    if input_dim < 1 or hidden_dim < 1:
        raise ConfigError("input_dim and hidden_dim must be positive")
    rng = np.random.default_rng(seed)
    bound = 1.0 / np.sqrt(hidden_dim)
    w1 = rng.uniform(-bound, bound, size=(input_dim, hidden_dim))
    w2 = rng.uniform(-bound, bound, size=hidden_dim)
    return VarianceNet(w1, np.zeros(hidden_dim), w2, np.zeros(1))
