"""LSTM regressor with exact batch backpropagation through time.

A single-layer LSTM consumes a window of observations and a dense head
maps the final hidden state to one real prediction.  Per step, with
input x_t and previous state (h_{t-1}, C_{t-1}):

    i_t = sigmoid(x_t U^i + h_{t-1} W^i + b^i)     input gate
    o_t = sigmoid(x_t U^o + h_{t-1} W^o + b^o)     output gate
    f_t = sigmoid(x_t U^f + h_{t-1} W^f + b^f)     forget gate
    g_t = tanh   (x_t U^g + h_{t-1} W^g + b^g)     candidate cell

Two cell-update variants are supported:

    "standard":      C_t = f_t * C_{t-1} + i_t * g_t,  h_t = o_t * tanh(C_t)
    "sigmoid_cell":  C_t = sigmoid(f_t * C_{t-1} + i_t * g_t),
                     h_t = tanh(C_t * o_t)

"standard" is the conventional formulation and the default; the
"sigmoid_cell" variant squashes the cell state through a sigmoid and
keeps it in (0, 1).  Both share the same gate parameters.

Prediction: y = h_T . w_out + b_out.

Internally the four gate parameter blocks are stored fused as
(input_dim, 4H), (H, 4H) and (4H,) arrays in gate order i, o, f, g so a
step costs two matrix products.  Per-gate views are exposed as
properties (u_i, w_f, ...).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError, NumericError

VARIANTS = ("standard", "sigmoid_cell")


def sigmoid(x: np.ndarray) -> np.ndarray:
    # Split by sign so neither branch exponentiates a large positive value.
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


@dataclass
class LstmState:
    """Recurrent state carried between steps."""

    h: np.ndarray
    c: np.ndarray

    @staticmethod
    def zeros(hidden_dim: int) -> "LstmState":
        return LstmState(np.zeros(hidden_dim), np.zeros(hidden_dim))


@dataclass
class LstmModel:
    """Parameters of one LSTM-plus-dense regressor.

    u: (input_dim, 4H) input weights, w: (H, 4H) recurrent weights,
    b: (4H,) gate biases, w_out: (H,) dense weights, b_out: (1,) dense
    bias.  Gate order inside the fused axis is i, o, f, g.

    use_bias=False removes the gate biases from the forward pass (the
    arrays are kept but stay zero and receive no updates).
    """

    u: np.ndarray
    w: np.ndarray
    b: np.ndarray
    w_out: np.ndarray
    b_out: np.ndarray
    variant: str = "standard"
    use_bias: bool = True

    def __post_init__(self) -> None:
        if self.variant not in VARIANTS:
            raise ConfigError(f"unknown LSTM variant {self.variant!r}")
        h = self.hidden_dim
        d = self.input_dim
        if self.u.shape != (d, 4 * h) or self.w.shape != (h, 4 * h):
            raise ConfigError("LSTM parameter shapes are inconsistent")
        if self.b.shape != (4 * h,) or self.w_out.shape != (h,) or self.b_out.shape != (1,):
            raise ConfigError("LSTM parameter shapes are inconsistent")

    @property
    def input_dim(self) -> int:
        return self.u.shape[0]

    @property
    def hidden_dim(self) -> int:
        return self.w.shape[0]

    def _gate(self, arr: np.ndarray, idx: int) -> np.ndarray:
        h = self.hidden_dim
        return arr[..., idx * h : (idx + 1) * h]

    # Per-gate views of the fused arrays (read/write).
    @property
    def u_i(self) -> np.ndarray:
        return self._gate(self.u, 0)

    @property
    def u_o(self) -> np.ndarray:
        return self._gate(self.u, 1)

    @property
    def u_f(self) -> np.ndarray:
        return self._gate(self.u, 2)

    @property
    def u_g(self) -> np.ndarray:
        return self._gate(self.u, 3)

    @property
    def w_i(self) -> np.ndarray:
        return self._gate(self.w, 0)

    @property
    def w_o(self) -> np.ndarray:
        return self._gate(self.w, 1)

    @property
    def w_f(self) -> np.ndarray:
        return self._gate(self.w, 2)

    @property
    def w_g(self) -> np.ndarray:
        return self._gate(self.w, 3)

    @property
    def b_i(self) -> np.ndarray:
        return self._gate(self.b, 0)

    @property
    def b_o(self) -> np.ndarray:
        return self._gate(self.b, 1)

    @property
    def b_f(self) -> np.ndarray:
        return self._gate(self.b, 2)

    @property
    def b_g(self) -> np.ndarray:
        return self._gate(self.b, 3)

    def param_arrays(self) -> dict[str, np.ndarray]:
        """Live parameter arrays; mutating them mutates the model."""
        return {"u": self.u, "w": self.w, "b": self.b,
                "w_out": self.w_out, "b_out": self.b_out}

    def copy(self) -> "LstmModel":
        return LstmModel(self.u.copy(), self.w.copy(), self.b.copy(),
                         self.w_out.copy(), self.b_out.copy(),
                         variant=self.variant, use_bias=self.use_bias)

    # ------------------------------------------------------------------
    # Forward
    # ------------------------------------------------------------------

    def forward_cached(self, x: np.ndarray, need_cache: bool = True):
        """Run the batch forward pass.

        x: (B, T) for scalar inputs or (B, T, input_dim).
        Returns (predictions (B,), cache) where cache holds the
        activations needed by backward_from_cache (None when
        need_cache=False).
        """
        x3 = _as_batch3(x, self.input_dim)
        bsz, steps, _ = x3.shape
        hd = self.hidden_dim
        sigmoid_cell = self.variant == "sigmoid_cell"

        gates = np.empty((steps, bsz, 4 * hd)) if need_cache else None
        c_all = np.empty((steps + 1, bsz, hd)) if need_cache else None
        h_all = np.empty((steps + 1, bsz, hd)) if need_cache else None
        tanh_c = np.empty((steps, bsz, hd)) if (need_cache and not sigmoid_cell) else None
        if need_cache:
            c_all[0] = 0.0
            h_all[0] = 0.0

        h = np.zeros((bsz, hd))
        c = np.zeros((bsz, hd))
        for t in range(steps):
            a = x3[:, t, :] @ self.u + h @ self.w
            if self.use_bias:
                a = a + self.b
            i = sigmoid(a[:, 0 * hd : 1 * hd])
            o = sigmoid(a[:, 1 * hd : 2 * hd])
            f = sigmoid(a[:, 2 * hd : 3 * hd])
            g = np.tanh(a[:, 3 * hd : 4 * hd])
            if sigmoid_cell:
                c = sigmoid(f * c + i * g)
                h = np.tanh(c * o)
            else:
                c = f * c + i * g
                tc = np.tanh(c)
                h = o * tc
                if need_cache:
                    tanh_c[t] = tc
            if need_cache:
                gates[t][:, 0 * hd : 1 * hd] = i
                gates[t][:, 1 * hd : 2 * hd] = o
                gates[t][:, 2 * hd : 3 * hd] = f
                gates[t][:, 3 * hd : 4 * hd] = g
                c_all[t + 1] = c
                h_all[t + 1] = h

        y = h @ self.w_out + self.b_out[0]
        if not np.all(np.isfinite(y)):
            raise NumericError("LSTM forward produced non-finite output")
        cache = None
        if need_cache:
            cache = {"x3": x3, "gates": gates, "c_all": c_all,
                     "h_all": h_all, "tanh_c": tanh_c}
        return y, cache

    def predict_batch(self, x: np.ndarray) -> np.ndarray:
        y, _ = self.forward_cached(x, need_cache=False)
        return y

    def predict(self, window: np.ndarray) -> float:
        """Prediction for a single window of observations."""
        window = np.asarray(window, dtype=np.float64)
        if window.ndim == 1:
            if self.input_dim != 1:
                raise ConfigError("1-d window given to a multi-input model")
            x = window.reshape(1, -1)
        elif window.ndim == 2:
            x = window.reshape(1, *window.shape)
        else:
            raise ConfigError("window must be 1-d or 2-d")
        return float(self.predict_batch(x)[0])

    # ------------------------------------------------------------------
    # Backward
    # ------------------------------------------------------------------

    def backward_from_cache(self, cache: dict, dy: np.ndarray) -> dict[str, np.ndarray]:
        """Gradients of sum_k dy_k * y_k with respect to every parameter.

        dy: (B,) upstream gradient of the predictions.  Raises
        NumericError naming the parameter if a gradient is non-finite.
        """
        x3 = cache["x3"]
        gates = cache["gates"]
        c_all = cache["c_all"]
        h_all = cache["h_all"]
        tanh_c = cache["tanh_c"]
        steps = x3.shape[1]
        hd = self.hidden_dim
        sigmoid_cell = self.variant == "sigmoid_cell"

        grads = {k: np.zeros_like(v) for k, v in self.param_arrays().items()}
        grads["w_out"] += h_all[steps].T @ dy
        grads["b_out"][0] = dy.sum()

        dh = dy[:, None] * self.w_out[None, :]
        dc_carry = np.zeros_like(dh)
        da = np.empty((x3.shape[0], 4 * hd))
        for t in range(steps - 1, -1, -1):
            i = gates[t][:, 0 * hd : 1 * hd]
            o = gates[t][:, 1 * hd : 2 * hd]
            f = gates[t][:, 2 * hd : 3 * hd]
            g = gates[t][:, 3 * hd : 4 * hd]
            c_prev = c_all[t]
            if sigmoid_cell:
                h_t = h_all[t + 1]
                c = c_all[t + 1]
                dp = dh * (1.0 - h_t * h_t)          # p = c * o
                do = dp * c
                dc = dp * o + dc_carry
                ds = dc * c * (1.0 - c)              # c = sigmoid(s)
                di = ds * g
                df = ds * c_prev
                dg = ds * i
                dc_carry = ds * f
            else:
                tc = tanh_c[t]
                do = dh * tc
                dc = dh * o * (1.0 - tc * tc) + dc_carry
                di = dc * g
                df = dc * c_prev
                dg = dc * i
                dc_carry = dc * f
            da[:, 0 * hd : 1 * hd] = di * i * (1.0 - i)
            da[:, 1 * hd : 2 * hd] = do * o * (1.0 - o)
            da[:, 2 * hd : 3 * hd] = df * f * (1.0 - f)
            da[:, 3 * hd : 4 * hd] = dg * (1.0 - g * g)
            grads["u"] += x3[:, t, :].T @ da
            grads["w"] += h_all[t].T @ da
            if self.use_bias:
                grads["b"] += da.sum(axis=0)
            dh = da @ self.w.T

        for name, grad in grads.items():
            if not np.all(np.isfinite(grad)):
                raise NumericError(f"non-finite gradient for parameter {name!r}")
        return grads

    # ------------------------------------------------------------------
    # Training interface (mean squared error)
    # ------------------------------------------------------------------

    def batch_loss(self, x: np.ndarray, labels: np.ndarray) -> float:
        from .losses import mse_loss

        return mse_loss(self.predict_batch(x), labels)

    def batch_loss_and_grads(self, x: np.ndarray, labels: np.ndarray):
        y, cache = self.forward_cached(x, need_cache=True)
        diff = y - np.asarray(labels, dtype=np.float64)
        loss = float(np.mean(diff * diff))
        dy = 2.0 * diff / diff.size
        return loss, self.backward_from_cache(cache, dy)


def lstm_cell_forward(model: LstmModel, x_t: np.ndarray, state: LstmState) -> LstmState:
    """One recurrent step for a single sample.

    x_t: (input_dim,) input, state: previous (h, c).  Returns the new
    state.  Raises ConfigError on dimension mismatch and NumericError if
    the new state is non-finite.
    """
    x_t = np.asarray(x_t, dtype=np.float64)
    if x_t.shape != (model.input_dim,):
        raise ConfigError(
            f"x_t has shape {x_t.shape}, expected ({model.input_dim},)"
        )
    hd = model.hidden_dim
    if state.h.shape != (hd,) or state.c.shape != (hd,):
        raise ConfigError("state dimensions do not match the model")

    a = x_t @ model.u + state.h @ model.w
    if model.use_bias:
        a = a + model.b
    i = sigmoid(a[0 * hd : 1 * hd])
    o = sigmoid(a[1 * hd : 2 * hd])
    f = sigmoid(a[2 * hd : 3 * hd])
    g = np.tanh(a[3 * hd : 4 * hd])
    if model.variant == "sigmoid_cell":
        c = sigmoid(f * state.c + i * g)
        h = np.tanh(c * o)
    else:
        c = f * state.c + i * g
        h = o * np.tanh(c)
    if not (np.all(np.isfinite(h)) and np.all(np.isfinite(c))):
        raise NumericError("LSTM cell produced non-finite state")
    return LstmState(h, c)


def init_lstm(input_dim: int, hidden_dim: int, seed: int,
              variant: str = "standard", use_bias: bool = True) -> LstmModel:
    """Random initial parameters.

    Weights are uniform on [-1/sqrt(H), +1/sqrt(H)] with H the hidden
    dimension; biases start at zero except the forget-gate bias, which
    starts at +1 so early training does not erase the cell state.
    """
    if input_dim < 1 or hidden_dim < 1:
        raise ConfigError("input_dim and hidden_dim must be positive")
    rng = np.random.default_rng(seed)
    bound = 1.0 / np.sqrt(hidden_dim)
    u = rng.uniform(-bound, bound, size=(input_dim, 4 * hidden_dim))
    w = rng.uniform(-bound, bound, size=(hidden_dim, 4 * hidden_dim))
    w_out = rng.uniform(-bound, bound, size=hidden_dim)
    b = np.zeros(4 * hidden_dim)
    if use_bias:
        b[2 * hidden_dim : 3 * hidden_dim] = 1.0
    return LstmModel(u, w, b, w_out, np.zeros(1), variant=variant, use_bias=use_bias)


def _as_batch3(x: np.ndarray, input_dim: int) -> np.ndarray:
    """Normalize batch input to (B, T, input_dim) float64."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 2:
        if input_dim != 1:
            raise ConfigError("2-d batch given to a multi-input model")
        x = x[:, :, None]
    if x.ndim != 3 or x.shape[2] != input_dim:
        raise ConfigError(f"batch shape {x.shape} does not match input_dim={input_dim}")
    if x.shape[1] < 1:
        raise ConfigError("empty window")
    return x
