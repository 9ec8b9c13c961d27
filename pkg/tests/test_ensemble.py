import json

import numpy as np
import pytest
from scipy.stats import spearmanr

from driftguard.dataset import TimeSeries, make_windows
from driftguard.ensemble import (
    EnsembleModel,
    ResidualPairs,
    UncertaintyBundle,
    bundle_from_dict,
    bundle_to_dict,
    compute_residuals,
    ensemble_predict,
    ensemble_predict_batch,
    fit_bundle,
    load_bundle,
    predict_total_std,
    predict_total_std_batch,
    save_bundle,
    train_ensemble,
    train_variance_net,
)
from driftguard.errors import ConfigError, InputError, ParseError
from driftguard.nn import TrainConfig, init_lstm, init_variance_net
from driftguard.nn.ffnet import VAR_FLOOR, VarianceNet


def constant_member(c, window=3, hidden=2):
    """LSTM whose output is the constant c for every input."""
    model = init_lstm(1, hidden, seed=0)
    for arr in model.param_arrays().values():
        arr[...] = 0.0
    model.b_out[0] = c
    return model


def constant_ensemble(outputs, window=3):
    members = [constant_member(c, window) for c in outputs]
    return EnsembleModel(members, [[0, 0, 0]] * len(members), window)


def constant_varnet(variance, window=3):
    """Variance net predicting exactly `variance` everywhere."""
    net = init_variance_net(window, 4, seed=0)
    for arr in net.param_arrays().values():
        arr[...] = 0.0
    net.b2[0] = np.log(variance - VAR_FLOOR)
    return net


def small_cfg(**kw):
    base = dict(learning_rate=0.01, max_epochs=60, batch_size=16,
                patience=60, hidden_dim=8, rng_seed=0)
    base.update(kw)
    return TrainConfig(**base)


# ----------------------------------------------------------------------
# Aggregation arithmetic
# ----------------------------------------------------------------------

def test_ensemble_predict_examples():
    window = np.zeros(3)
    f, s2 = ensemble_predict(constant_ensemble([1.0, 3.0]), window)
    assert (f, s2) == (2.0, 2.0)
    f, s2 = ensemble_predict(constant_ensemble([0.0, 1.0, 2.0]), window)
    assert (f, s2) == (1.0, 1.0)
    f, s2 = ensemble_predict(constant_ensemble([4.0, 4.0, 4.0]), window)
    assert (f, s2) == (4.0, 0.0)


def test_ensemble_predict_matches_direct_oracle():
    rng = np.random.default_rng(0)
    for _ in range(10):
        b = int(rng.integers(2, 7))
        outputs = rng.normal(size=b)
        f, s2 = ensemble_predict(constant_ensemble(list(outputs)), np.zeros(3))
        assert f == pytest.approx(float(np.mean(outputs)), abs=1e-12)
        assert s2 == pytest.approx(float(np.var(outputs, ddof=1)), abs=1e-12)


def test_ensemble_predict_width_mismatch():
    with pytest.raises(InputError):
        ensemble_predict(constant_ensemble([1.0, 2.0]), np.zeros(4))


def test_ensemble_requires_two_members():
    with pytest.raises(ConfigError):
        constant_ensemble([1.0])
    pairs = make_windows(TimeSeries(np.arange(10.0)), 2)
    with pytest.raises(ConfigError):
        train_ensemble(pairs, 1, small_cfg(), master_seed=0)


def test_batch_prediction_matches_single():
    e = constant_ensemble([1.0, 2.0, 4.0])
    x = np.random.default_rng(1).normal(size=(5, 3))
    f_b, s2_b = ensemble_predict_batch(e, x)
    for k in range(5):
        f, s2 = ensemble_predict(e, x[k])
        assert f_b[k] == pytest.approx(f, abs=1e-12)
        assert s2_b[k] == pytest.approx(s2, abs=1e-12)


# ----------------------------------------------------------------------
# Residuals
# ----------------------------------------------------------------------

def _pairs_with_labels(labels, window=3):
    x = np.zeros((len(labels), window))
    from driftguard.dataset import WindowedPairs

    return WindowedPairs(window, x, np.asarray(labels, dtype=float),
                         np.arange(len(labels)))


def test_residual_arithmetic_examples():
    # sigma2=0, l=2, f=1 -> r2=1
    e = constant_ensemble([1.0, 1.0])
    res = compute_residuals(e, _pairs_with_labels([2.0]))
    assert res.r2[0] == pytest.approx(1.0, abs=1e-12)
    # sigma2=0.5, l=1, f=1 -> clamp to 0
    e = constant_ensemble([0.5, 1.5])
    res = compute_residuals(e, _pairs_with_labels([1.0]))
    assert res.r2[0] == 0.0
    # sigma2=1, l=3, f=1 -> 3
    half = 1.0 / np.sqrt(2.0)
    e = constant_ensemble([1.0 - half, 1.0 + half])
    res = compute_residuals(e, _pairs_with_labels([3.0]))
    assert res.r2[0] == pytest.approx(3.0, abs=1e-12)


def test_residuals_never_negative():
    rng = np.random.default_rng(2)
    e = constant_ensemble(list(rng.normal(size=4)))
    res = compute_residuals(e, _pairs_with_labels(rng.normal(size=50)))
    assert np.all(res.r2 >= 0.0)


# ----------------------------------------------------------------------
# Ensemble training
# ----------------------------------------------------------------------

def test_train_ensemble_constant_series():
    c = 2.0
    series = TimeSeries(np.full(80, c))
    pairs = make_windows(series, 4)
    e = train_ensemble(pairs, 5, small_cfg(), master_seed=7)
    window = np.full(4, c)
    for m in e.members:
        assert abs(m.predict(window) - c) < 0.05 * max(1.0, abs(c))


def test_train_ensemble_deterministic():
    series = TimeSeries(np.sin(np.arange(60) / 5.0))
    pairs = make_windows(series, 3)
    cfg = small_cfg(max_epochs=8, hidden_dim=4)
    a = train_ensemble(pairs, 2, cfg, master_seed=123)
    b = train_ensemble(pairs, 2, cfg, master_seed=123)
    for ma, mb in zip(a.members, b.members):
        for k, v in ma.param_arrays().items():
            assert np.array_equal(v, mb.param_arrays()[k]), k
    assert a.member_seeds == b.member_seeds


# ----------------------------------------------------------------------
# Variance net
# ----------------------------------------------------------------------

def test_variance_net_learns_constant_variance():
    rng = np.random.default_rng(3)
    v = 0.7
    x = rng.normal(size=(300, 3))
    r2 = np.full(300, v)
    res = ResidualPairs(x, r2)
    net = train_variance_net(res, small_cfg(max_epochs=200, patience=200))
    preds = net.predict_variance(rng.normal(size=(100, 3)))
    assert np.all(np.abs(preds - v) < 0.1 * v)


def test_variance_net_positive_everywhere():
    net = train_variance_net(
        ResidualPairs(np.random.default_rng(4).normal(size=(40, 3)),
                      np.random.default_rng(5).uniform(0, 2, size=40)),
        small_cfg(max_epochs=10))
    x = np.random.default_rng(6).normal(scale=10.0, size=(1000, 3))
    assert np.all(net.predict_variance(x) > 0.0)


# ----------------------------------------------------------------------
# Total uncertainty
# ----------------------------------------------------------------------

def _stub_bundle(outputs, noise_var, window=3):
    e = constant_ensemble(outputs, window)
    net = constant_varnet(noise_var, window)
    return UncertaintyBundle(e, net, window, {})


def test_total_std_arithmetic():
    half = 1.0 / np.sqrt(2.0)
    bundle = _stub_bundle([1.0 - half, 1.0 + half], 3.0)   # s2f=1, s2e=3
    f, s = predict_total_std(bundle, np.zeros(3))
    assert f == pytest.approx(1.0, abs=1e-12)
    assert s == pytest.approx(2.0, abs=1e-9)
    degenerate = _stub_bundle([1.0, 1.0], 4.0)
    _, s = predict_total_std(degenerate, np.zeros(3))
    assert s == pytest.approx(2.0, abs=1e-9)


def test_total_std_decomposition_identity():
    rng = np.random.default_rng(7)
    bundle = _stub_bundle(list(rng.normal(size=3)), 1.3)
    x = rng.normal(size=(20, 3))
    f, s = predict_total_std_batch(bundle, x)
    noise = bundle.variance_net.predict_variance(x)
    _, model_var = ensemble_predict_batch(bundle.ensemble, x)
    np.testing.assert_allclose(s * s - noise, model_var, atol=1e-12)


def test_total_std_monotone_in_noise_variance():
    half = 1.0 / np.sqrt(2.0)
    outputs = [1.0 - half, 1.0 + half]
    previous = 0.0
    for noise in [0.5, 1.0, 2.0, 4.0]:
        _, s = predict_total_std(_stub_bundle(outputs, noise), np.zeros(3))
        assert s > previous
        previous = s


def test_total_std_width_mismatch():
    with pytest.raises(InputError):
        predict_total_std(_stub_bundle([1.0, 2.0], 1.0), np.zeros(5))


# ----------------------------------------------------------------------
# End-to-end Phase I
# ----------------------------------------------------------------------

def test_heteroscedasticity_recovery():
    # Pure noise with a known periodic volatility profile: the variance
    # net should track sigma^2_t (rank correlation, not calibration).
    rng = np.random.default_rng(11)
    n = 400
    t = np.arange(n)
    sigma = 0.6 + 0.4 * np.sin(2 * np.pi * t / 40.0)
    series = TimeSeries(sigma * rng.standard_normal(n))
    bundle = fit_bundle(series, window=5, b=3,
                        cfg=small_cfg(max_epochs=80, patience=15),
                        master_seed=42)
    pairs = make_windows(series, 5)
    predicted = bundle.variance_net.predict_variance(pairs.x)
    true_var = (sigma ** 2)[pairs.origin + 5]
    rho = spearmanr(predicted, true_var).statistic
    assert rho > 0.5


def test_fit_bundle_provenance_and_roundtrip(tmp_path):
    series = TimeSeries(np.sin(np.arange(40) / 3.0))
    bundle = fit_bundle(series, window=3, b=2,
                        cfg=small_cfg(max_epochs=5, hidden_dim=3),
                        master_seed=9)
    prov = bundle.provenance
    assert prov["master_seed"] == 9 and prov["b"] == 2
    assert len(prov["data_sha256"]) == 64
    path = tmp_path / "bundle.json"
    save_bundle(bundle, path)
    back = load_bundle(path)
    x = np.random.default_rng(1).normal(size=(4, 3))
    f0, s0 = predict_total_std_batch(bundle, x)
    f1, s1 = predict_total_std_batch(back, x)
    np.testing.assert_array_equal(f0, f1)
    np.testing.assert_array_equal(s0, s1)
    assert back.provenance == prov


def test_bundle_document_validation(tmp_path):
    series = TimeSeries(np.sin(np.arange(30) / 3.0))
    bundle = fit_bundle(series, window=3, b=2,
                        cfg=small_cfg(max_epochs=3, hidden_dim=3),
                        master_seed=1)
    doc = bundle_to_dict(bundle)
    bad = json.loads(json.dumps(doc))
    bad["format_version"] = 5
    with pytest.raises(ParseError):
        bundle_from_dict(bad)
    mismatched = json.loads(json.dumps(doc))
    mismatched["window"] = 7    # variance net width no longer matches
    with pytest.raises(ParseError):
        bundle_from_dict(mismatched)
