"""Neural building blocks: LSTM and RNN regressors, the variance
network, losses, optimizers, a training loop and gradient checking.
All computation is float64 numpy with exact analytic gradients."""

from .ffnet import VAR_FLOOR, VarianceNet, init_variance_net
from .gradcheck import grad_check
from .losses import mse_loss, nll_loss
from .lstm import LstmModel, LstmState, init_lstm, lstm_cell_forward, sigmoid
from .optim import Adam, Sgd, make_optimizer, optimizer_step
from .rnn import RnnModel, init_rnn, rnn_cell_forward
from .serialize import load_model, model_from_dict, model_to_dict, save_model
from .train import TrainConfig, TrainHistory, train

__all__ = [
    "VAR_FLOOR", "VarianceNet", "init_variance_net",
    "grad_check", "mse_loss", "nll_loss",
    "LstmModel", "LstmState", "init_lstm", "lstm_cell_forward", "sigmoid",
    "Adam", "Sgd", "make_optimizer", "optimizer_step",
    "RnnModel", "init_rnn", "rnn_cell_forward",
    "load_model", "model_from_dict", "model_to_dict", "save_model",
    "TrainConfig", "TrainHistory", "train",
]
