"""Mini-batch training loop with validation-based early stopping."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from ..errors import ConfigError, InputError, NumericError
from .optim import make_optimizer


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters shared by every trainable model in the package.

    hidden_dim applies to the predictors; the variance network has its
    own fixed width.  rng_seed drives batch shuffling only (parameter
    initialization is seeded separately).
    """

    learning_rate: float = 0.01
    max_epochs: int = 300
    batch_size: int = 32
    patience: int = 20
    hidden_dim: int = 32
    optimizer: str = "adam"
    rng_seed: int = 0

    def __post_init__(self) -> None:
        if self.learning_rate <= 0.0:
            raise ConfigError("learning_rate must be positive")
        if self.max_epochs < 1 or self.batch_size < 1 or self.hidden_dim < 1:
            raise ConfigError("max_epochs, batch_size and hidden_dim must be >= 1")
        if self.patience < 1:
            raise ConfigError("patience must be >= 1")
        if self.optimizer not in ("sgd", "adam"):
            raise ConfigError(f"unknown optimizer {self.optimizer!r}")

    def with_seed(self, rng_seed: int) -> "TrainConfig":
        return replace(self, rng_seed=rng_seed)


@dataclass
class TrainHistory:
    train_losses: list[float] = field(default_factory=list)
    val_losses: list[float] = field(default_factory=list)
    best_epoch: int = 0          # 1-based; 0 means no epoch ran

    @property
    def epochs(self) -> int:
        return len(self.train_losses)

    @property
    def best_val_loss(self) -> float:
        return self.val_losses[self.best_epoch - 1]


def train(model, x: np.ndarray, y: np.ndarray,
          x_val: np.ndarray, y_val: np.ndarray,
          config: TrainConfig):
    """Train a model and return (best_model, history).

    The model must expose batch_loss, batch_loss_and_grads, param_arrays
    and copy (see LstmModel, RnnModel, VarianceNet).  Gradients are of
    the mean per-batch loss.  After each epoch the validation loss is
    evaluated; training stops when it has not improved for `patience`
    consecutive epochs, and the returned model carries the parameters of
    the best validation epoch.  Fully deterministic for a fixed config.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = y.shape[0]
    if n == 0 or np.asarray(y_val).shape[0] == 0:
        raise InputError("training and validation sets must be non-empty")
    if x.shape[0] != n:
        raise InputError("train: inputs and labels differ in length")

    model = model.copy()
    params = model.param_arrays()
    opt = make_optimizer(config.optimizer, config.learning_rate)
    rng = np.random.default_rng(config.rng_seed)

    history = TrainHistory()
    best_val = np.inf
    best_params = None
    since_best = 0
    for epoch in range(1, config.max_epochs + 1):
        order = rng.permutation(n)
        epoch_loss = 0.0
        for start in range(0, n, config.batch_size):
            idx = order[start : start + config.batch_size]
            loss, grads = model.batch_loss_and_grads(x[idx], y[idx])
            if not np.isfinite(loss):
                raise NumericError(f"training diverged at epoch {epoch}")
            opt.step(params, grads)
            epoch_loss += loss * idx.size
        history.train_losses.append(epoch_loss / n)

        val_loss = model.batch_loss(x_val, y_val)
        if not np.isfinite(val_loss):
            raise NumericError(f"validation loss became non-finite at epoch {epoch}")
        history.val_losses.append(val_loss)
        if val_loss < best_val:
            best_val = val_loss
            best_params = {k: v.copy() for k, v in params.items()}
            history.best_epoch = epoch
            since_best = 0
        else:
            since_best += 1
            if since_best >= config.patience:
                break

    for k, v in params.items():
        v[...] = best_params[k]
    return model, history
