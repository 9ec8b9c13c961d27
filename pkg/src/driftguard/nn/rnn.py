"""Elman RNN regressor: h_t = tanh(x_t U + h_{t-1} W + b), y = h_T . w_out + b_out."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError, NumericError
from .lstm import _as_batch3


@dataclass
class RnnModel:
    u: np.ndarray       # (input_dim, H)
    w: np.ndarray       # (H, H)
    b: np.ndarray       # (H,)
    w_out: np.ndarray   # (H,)
    b_out: np.ndarray   # (1,)

    def __post_init__(self) -> None:
        h = self.hidden_dim
        if (self.u.shape != (self.input_dim, h) or self.w.shape != (h, h)
                or self.b.shape != (h,) or self.w_out.shape != (h,)
                or self.b_out.shape != (1,)):
            raise ConfigError("RNN parameter shapes are inconsistent")

    @property
    def input_dim(self) -> int:
        return self.u.shape[0]

    @property
    def hidden_dim(self) -> int:
        return self.w.shape[0]

    def param_arrays(self) -> dict[str, np.ndarray]:
        return {"u": self.u, "w": self.w, "b": self.b,
                "w_out": self.w_out, "b_out": self.b_out}

    def copy(self) -> "RnnModel":
        return RnnModel(self.u.copy(), self.w.copy(), self.b.copy(),
                        self.w_out.copy(), self.b_out.copy())

    def forward_cached(self, x: np.ndarray, need_cache: bool = True):
        x3 = _as_batch3(x, self.input_dim)
        bsz, steps, _ = x3.shape
        hd = self.hidden_dim
        h_all = np.empty((steps + 1, bsz, hd)) if need_cache else None
        if need_cache:
            h_all[0] = 0.0
        h = np.zeros((bsz, hd))
        for t in range(steps):
            h = np.tanh(x3[:, t, :] @ self.u + h @ self.w + self.b)
            if need_cache:
                h_all[t + 1] = h
        y = h @ self.w_out + self.b_out[0]
        if not np.all(np.isfinite(y)):
            raise NumericError("RNN forward produced non-finite output")
        return y, ({"x3": x3, "h_all": h_all} if need_cache else None)

    def predict_batch(self, x: np.ndarray) -> np.ndarray:
        return self.forward_cached(x, need_cache=False)[0]

    def predict(self, window: np.ndarray) -> float:
        window = np.asarray(window, dtype=np.float64)
        if window.ndim == 1:
            window = window.reshape(1, -1)
        else:
            window = window.reshape(1, *window.shape)
        return float(self.predict_batch(window)[0])

    def backward_from_cache(self, cache: dict, dy: np.ndarray) -> dict[str, np.ndarray]:
        x3, h_all = cache["x3"], cache["h_all"]
        steps = x3.shape[1]
        grads = {k: np.zeros_like(v) for k, v in self.param_arrays().items()}
        grads["w_out"] += h_all[steps].T @ dy
        grads["b_out"][0] = dy.sum()
        dh = dy[:, None] * self.w_out[None, :]
        for t in range(steps - 1, -1, -1):
            h_t = h_all[t + 1]
            da = dh * (1.0 - h_t * h_t)
            grads["u"] += x3[:, t, :].T @ da
            grads["w"] += h_all[t].T @ da
            grads["b"] += da.sum(axis=0)
            dh = da @ self.w.T
        for name, grad in grads.items():
            if not np.all(np.isfinite(grad)):
                raise NumericError(f"non-finite gradient for parameter {name!r}")
        return grads

    def batch_loss(self, x: np.ndarray, labels: np.ndarray) -> float:
        from .losses import mse_loss

        return mse_loss(self.predict_batch(x), labels)

    def batch_loss_and_grads(self, x: np.ndarray, labels: np.ndarray):
        y, cache = self.forward_cached(x, need_cache=True)
        diff = y - np.asarray(labels, dtype=np.float64)
        loss = float(np.mean(diff * diff))
        dy = 2.0 * diff / diff.size
        return loss, self.backward_from_cache(cache, dy)


def rnn_cell_forward(model: RnnModel, x_t: np.ndarray, h: np.ndarray) -> np.ndarray:
    """One recurrent step for a single sample; returns the new hidden state."""
    x_t = np.asarray(x_t, dtype=np.float64)
    if x_t.shape != (model.input_dim,) or h.shape != (model.hidden_dim,):
        raise ConfigError("rnn_cell_forward: dimension mismatch")
    h_new = np.tanh(x_t @ model.u + h @ model.w + model.b)
    if not np.all(np.isfinite(h_new)):
        raise NumericError("RNN cell produced non-finite state")
    return h_new


def init_rnn(input_dim: int, hidden_dim: int, seed: int) -> RnnModel:
    """Uniform [-1/sqrt(H), +1/sqrt(H)] weights, zero biases."""
    if input_dim < 1 or hidden_dim < 1:
        raise ConfigError("input_dim and hidden_dim must be positive")
    rng = np.random.default_rng(seed)
    bound = 1.0 / np.sqrt(hidden_dim)
    u = rng.uniform(-bound, bound, size=(input_dim, hidden_dim))
    w = rng.uniform(-bound, bound, size=(hidden_dim, hidden_dim))
    w_out = rng.uniform(-bound, bound, size=hidden_dim)
    return RnnModel(u, w, np.zeros(hidden_dim), w_out, np.zeros(1))
