"""Phase I pipeline: bootstrap LSTM ensemble, per-input model variance,
noise-residual extraction, and the variance network.

The ensemble mean f_hat estimates the signal; the spread of member
predictions estimates model uncertainty per input:

    f_hat(x)    = (1/b) sum_j f_j(x)
    s2_model(x) = sum_j (f_j(x) - f_hat(x))^2 / (b - 1)

Squared noise residuals are what the ensemble cannot explain,

    r2_i = max{ (l_i - f_hat(x_i))^2 - s2_model(x_i), 0 },

and a small network trained on (x_i, r2_i) under the Gaussian
negative log-likelihood predicts the time-varying noise variance.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dataset import TimeSeries, WindowedPairs, bootstrap_resample, make_windows
from .errors import ConfigError, InputError, NumericError, ParseError
from .nn import (
    LstmModel,
    TrainConfig,
    VarianceNet,
    init_lstm,
    init_variance_net,
    model_from_dict,
    model_to_dict,
    train,
)

BUNDLE_FORMAT_VERSION = 1
VARNET_HIDDEN = 16


@dataclass
class EnsembleModel:
    """b bootstrap-trained LSTM members sharing one window length."""

    members: list[LstmModel]
    member_seeds: list[list[int]]   # per member: [bag, init, shuffle]
    window: int

    def __post_init__(self) -> None:
        if len(self.members) < 2:
            raise ConfigError("ensemble needs at least 2 members")
        dims = {m.input_dim for m in self.members}
        if dims != {1}:
            raise ConfigError("ensemble members must take scalar inputs")

    @property
    def b(self) -> int:
        return len(self.members)


@dataclass(frozen=True)
class ResidualPairs:
    """Windows with their clamped squared noise residuals."""

    x: np.ndarray    # (n, w)
    r2: np.ndarray   # (n,), all >= 0

    def __len__(self) -> int:
        return int(self.r2.size)


@dataclass
class UncertaintyBundle:
    """Everything Phase II needs: ensemble, variance net, window, and
    provenance (seeds, config, training-data fingerprint)."""

    ensemble: EnsembleModel
    variance_net: VarianceNet
    window: int
    provenance: dict

    def __post_init__(self) -> None:
        if self.ensemble.window != self.window:
            raise ConfigError("bundle window disagrees with ensemble window")
        if self.variance_net.input_dim != self.window:
            raise ConfigError("variance net input width disagrees with window")


def _derived_seeds(master_seed: int, count: int) -> list[int]:
    state = np.random.SeedSequence(master_seed).generate_state(count, dtype=np.uint64)
    return [int(s) for s in state]


def _fallback_validation(pairs: WindowedPairs) -> np.ndarray:
    n_val = max(1, len(pairs) // 10)
    return np.arange(len(pairs) - n_val, len(pairs))


def train_ensemble(pairs: WindowedPairs, b: int, cfg: TrainConfig,
                   master_seed: int, n: int | None = None,
                   variant: str = "standard", use_bias: bool = True) -> EnsembleModel:
    """Train b members on independent bootstrap bags.

    Each member's bag is validated on its own out-of-bag pairs (early
    stopping); when a bag covers every pair the last 10% of the pair set
    serves as validation instead.  All per-member seeds derive from
    master_seed, so results are reproducible.  n defaults to |pairs|.
    """
    if b < 2:
        raise ConfigError("b must be >= 2 so member variance is defined")
    if n is None:
        n = len(pairs)
    seeds = _derived_seeds(master_seed, 3 * b)
    members: list[LstmModel] = []
    member_seeds: list[list[int]] = []
    for j in range(b):
        bag_seed, init_seed, shuffle_seed = seeds[3 * j : 3 * j + 3]
        split = bootstrap_resample(pairs, n, seed=bag_seed)
        x_bag, y_bag = pairs.take(split.bag)
        val_idx = split.oob if split.oob.size else _fallback_validation(pairs)
        x_val, y_val = pairs.take(val_idx)
        model = init_lstm(1, cfg.hidden_dim, init_seed,
                          variant=variant, use_bias=use_bias)
        try:
            fitted, _ = train(model, x_bag, y_bag, x_val, y_val,
                              cfg.with_seed(shuffle_seed))
        except NumericError as exc:
            raise NumericError(f"ensemble member {j}: {exc}") from exc
        members.append(fitted)
        member_seeds.append([bag_seed, init_seed, shuffle_seed])
    return EnsembleModel(members, member_seeds, pairs.window_len)


def _member_outputs(e: EnsembleModel, x: np.ndarray) -> np.ndarray:
    """Stacked member predictions, shape (b, B)."""
    return np.stack([m.predict_batch(x) for m in e.members])


def ensemble_predict_batch(e: EnsembleModel, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(f_hat, model variance) for each row of x."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != e.window:
        raise InputError(f"windows of width {e.window} required, got {x.shape}")
    outs = _member_outputs(e, x)
    f_hat = outs.mean(axis=0)
    sigma2 = np.sum((outs - f_hat) ** 2, axis=0) / (e.b - 1)
    return f_hat, sigma2


def ensemble_predict(e: EnsembleModel, x_vec: np.ndarray) -> tuple[float, float]:
    """Mean prediction and sample variance of member outputs at one window."""
    x_vec = np.asarray(x_vec, dtype=np.float64)
    if x_vec.shape != (e.window,):
        raise InputError(f"window of length {e.window} required, got {x_vec.shape}")
    f_hat, sigma2 = ensemble_predict_batch(e, x_vec.reshape(1, -1))
    return float(f_hat[0]), float(sigma2[0])


def compute_residuals(e: EnsembleModel, pairs: WindowedPairs) -> ResidualPairs:
    """Clamped squared residuals r2 = max{(l - f_hat)^2 - s2_model, 0}."""
    if len(pairs) == 0:
        raise InputError("compute_residuals: empty pair set")
    f_hat, sigma2 = ensemble_predict_batch(e, pairs.x)
    r2 = np.maximum((pairs.labels - f_hat) ** 2 - sigma2, 0.0)
    return ResidualPairs(pairs.x.copy(), r2)


def train_variance_net(residuals: ResidualPairs, cfg: TrainConfig,
                       init_seed: int = 0, shuffle_seed: int = 0,
                       hidden_dim: int = VARNET_HIDDEN) -> VarianceNet:
    """Fit the noise-variance network on residual pairs.

    The last 10% of the pairs (at least one) is held out for early
    stopping.  cfg drives the optimizer settings; the architecture is
    fixed at one hidden layer of `hidden_dim` tanh units.
    """
    n = len(residuals)
    if n == 0:
        raise InputError("train_variance_net: empty residual set")
    n_val = max(1, n // 10)
    n_train = max(1, n - n_val)
    x_train, r2_train = residuals.x[:n_train], residuals.r2[:n_train]
    x_val, r2_val = residuals.x[n_train:], residuals.r2[n_train:]
    if x_val.shape[0] == 0:
        x_val, r2_val = x_train, r2_train
    net = init_variance_net(residuals.x.shape[1], hidden_dim, init_seed)
    fitted, _ = train(net, x_train, r2_train, x_val, r2_val,
                      cfg.with_seed(shuffle_seed))
    return fitted


def predict_total_std_batch(bundle: UncertaintyBundle, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(f_hat, s) per row, with s = sqrt(noise variance + model variance)."""
    f_hat, sigma2_model = ensemble_predict_batch(bundle.ensemble, x)
    sigma2_noise = bundle.variance_net.predict_variance(np.asarray(x, dtype=np.float64))
    return f_hat, np.sqrt(sigma2_noise + sigma2_model)


def predict_total_std(bundle: UncertaintyBundle, x_vec: np.ndarray) -> tuple[float, float]:
    x_vec = np.asarray(x_vec, dtype=np.float64)
    if x_vec.shape != (bundle.window,):
        raise InputError(f"window of length {bundle.window} required, got {x_vec.shape}")
    f_hat, s = predict_total_std_batch(bundle, x_vec.reshape(1, -1))
    return float(f_hat[0]), float(s[0])


def series_fingerprint(series: TimeSeries) -> str:
    digest = hashlib.sha256()
    digest.update(series.values.tobytes())
    if series.timestamps is not None:
        digest.update(series.timestamps.astype("datetime64[s]").tobytes())
    return digest.hexdigest()


def fit_bundle(series: TimeSeries, window: int, b: int, cfg: TrainConfig,
               master_seed: int, n: int | None = None,
               variant: str = "standard", use_bias: bool = True,
               ensemble: EnsembleModel | None = None) -> UncertaintyBundle:
    """Run all of Phase I on an in-control series.

    A prebuilt ensemble may be passed in; it must have been trained
    with the same master_seed and settings, since the variance-net
    seeds are derived from master_seed either way.
    """
    pairs = make_windows(series, window)
    if ensemble is None:
        ensemble = train_ensemble(pairs, b, cfg, master_seed, n=n,
                                  variant=variant, use_bias=use_bias)
    elif ensemble.window != window or ensemble.b != b:
        raise ConfigError("prebuilt ensemble does not match the requested "
                          "window or member count")
    residuals = compute_residuals(ensemble, pairs)
    varnet_seeds = _derived_seeds(master_seed, 3 * b + 2)[3 * b :]
    try:
        variance_net = train_variance_net(residuals, cfg,
                                          init_seed=varnet_seeds[0],
                                          shuffle_seed=varnet_seeds[1])
    except NumericError as exc:
        raise NumericError(f"variance net: {exc}") from exc
    provenance = {
        "master_seed": master_seed,
        "train_config": dataclasses.asdict(cfg),
        "b": b,
        "n": len(pairs) if n is None else n,
        "variant": variant,
        "use_bias": use_bias,
        "data_sha256": series_fingerprint(series),
    }
    return UncertaintyBundle(ensemble, variance_net, window, provenance)


# ----------------------------------------------------------------------
# Bundle serialization
# ----------------------------------------------------------------------

def bundle_to_dict(bundle: UncertaintyBundle) -> dict:
    return {
        "format_version": BUNDLE_FORMAT_VERSION,
        "window": bundle.window,
        "b": bundle.ensemble.b,
        "member_seeds": bundle.ensemble.member_seeds,
        "members": [model_to_dict(m) for m in bundle.ensemble.members],
        "variance_net": model_to_dict(bundle.variance_net),
        "provenance": bundle.provenance,
    }


def bundle_from_dict(data: dict) -> UncertaintyBundle:
    try:
        version = data["format_version"]
        window = data["window"]
        members_doc = data["members"]
        varnet_doc = data["variance_net"]
    except (KeyError, TypeError) as exc:
        raise ParseError(f"bundle document is missing {exc}") from None
    if version != BUNDLE_FORMAT_VERSION:
        raise ParseError(f"unsupported bundle format_version {version!r}")
    members = [model_from_dict(doc) for doc in members_doc]
    if len(members) != data.get("b", len(members)):
        raise ParseError("bundle member count disagrees with b")
    for m in members:
        if not isinstance(m, LstmModel):
            raise ParseError("bundle members must be LSTM models")
    variance_net = model_from_dict(varnet_doc)
    if not isinstance(variance_net, VarianceNet):
        raise ParseError("bundle variance_net has the wrong kind")
    ensemble = EnsembleModel(members, [list(map(int, s)) for s in
                                       data.get("member_seeds", [])] or
                             [[0, 0, 0]] * len(members), window)
    try:
        return UncertaintyBundle(ensemble, variance_net, window,
                                 data.get("provenance", {}))
    except ConfigError as exc:
        raise ParseError(str(exc)) from None


def save_bundle(bundle: UncertaintyBundle, path: str | Path) -> None:
    Path(path).write_text(json.dumps(bundle_to_dict(bundle)) + "\n")


def load_bundle(path: str | Path) -> UncertaintyBundle:
    try:
        data = json.loads(Path(path).read_text())
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: not valid JSON ({exc})") from None
    return bundle_from_dict(data)
