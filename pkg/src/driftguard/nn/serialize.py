"""Versioned JSON serialization for models.

Weight arrays are written as row-major nested lists.  JSON floats use
Python's shortest round-trip repr, so save/load is lossless for
float64.  LSTM gate blocks are written separately (u_i, w_f, ...) even
though they are stored fused in memory.
"""

from __future__ import annotations

import dataclasses
import json
from pathlib import Path

import numpy as np

from ..errors import ConfigError, ParseError
from .ffnet import VarianceNet
from .lstm import LstmModel
from .rnn import RnnModel
from .train import TrainConfig

FORMAT_VERSION = 1
_GATES = ("i", "o", "f", "g")


def model_to_dict(model, train_config: TrainConfig | None = None,
                  rng_seed: int | None = None) -> dict:
    out: dict = {"format_version": FORMAT_VERSION}
    if isinstance(model, LstmModel):
        out["kind"] = "lstm"
        out["variant"] = model.variant
        out["use_bias"] = model.use_bias
        out["input_dim"] = model.input_dim
        out["hidden_dim"] = model.hidden_dim
        weights = {}
        for gi, gate in enumerate(_GATES):
            weights[f"u_{gate}"] = model._gate(model.u, gi).tolist()
            weights[f"w_{gate}"] = model._gate(model.w, gi).tolist()
            weights[f"b_{gate}"] = model._gate(model.b, gi).tolist()
        weights["w_out"] = model.w_out.tolist()
        weights["b_out"] = model.b_out.tolist()
        out["weights"] = weights
    elif isinstance(model, RnnModel):
        out["kind"] = "rnn"
        out["input_dim"] = model.input_dim
        out["hidden_dim"] = model.hidden_dim
        out["weights"] = {k: v.tolist() for k, v in model.param_arrays().items()}
    elif isinstance(model, VarianceNet):
        out["kind"] = "variance_net"
        out["input_dim"] = model.input_dim
        out["hidden_dim"] = model.hidden_dim
        out["weights"] = {k: v.tolist() for k, v in model.param_arrays().items()}
    else:
        raise ConfigError(f"cannot serialize object of type {type(model).__name__}")
    if train_config is not None:
        out["train_config"] = dataclasses.asdict(train_config)
    if rng_seed is not None:
        out["rng_seed"] = rng_seed
    return out


def model_from_dict(data: dict):
    try:
        version = data["format_version"]
        kind = data["kind"]
    except (KeyError, TypeError) as exc:
        raise ParseError(f"model document is missing {exc}") from None
    if version != FORMAT_VERSION:
        raise ParseError(f"unsupported model format_version {version!r}")
    try:
        weights = {k: np.asarray(v, dtype=np.float64) for k, v in data["weights"].items()}
        if kind == "lstm":
            u = np.concatenate([weights[f"u_{g}"] for g in _GATES], axis=1)
            w = np.concatenate([weights[f"w_{g}"] for g in _GATES], axis=1)
            b = np.concatenate([weights[f"b_{g}"] for g in _GATES])
            return LstmModel(u, w, b, weights["w_out"], weights["b_out"],
                             variant=data["variant"], use_bias=data["use_bias"])
        if kind == "rnn":
            return RnnModel(weights["u"], weights["w"], weights["b"],
                            weights["w_out"], weights["b_out"])
        if kind == "variance_net":
            return VarianceNet(weights["w1"], weights["b1"],
                               weights["w2"], weights["b2"])
    except KeyError as exc:
        raise ParseError(f"model document is missing weight {exc}") from None
    raise ParseError(f"unknown model kind {kind!r}")


def save_model(model, path: str | Path, train_config: TrainConfig | None = None,
               rng_seed: int | None = None) -> None:
    Path(path).write_text(
        json.dumps(model_to_dict(model, train_config, rng_seed)) + "\n"
    )


def load_model(path: str | Path):
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: not valid JSON ({exc})") from None
    return model_from_dict(data)
