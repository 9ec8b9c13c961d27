import math

import numpy as np
import pytest

from driftguard.dataset import (
    BootstrapSplit,
    TimeSeries,
    at_summary,
    bootstrap_resample,
    load_csv,
    load_spectra_csv,
    make_windows,
    resample_energy,
    split_train_test,
    write_csv,
)
from driftguard.errors import ConfigError, InputError, ParseError


def minute_day(start="2024-03-04T04:00:00", n=1440, values=None):
    t0 = np.datetime64(start, "s")
    stamps = t0 + np.arange(n) * np.timedelta64(60, "s")
    vals = np.arange(n, dtype=float) if values is None else values
    return TimeSeries(vals, stamps)


# ----------------------------------------------------------------------
# TimeSeries and windowing
# ----------------------------------------------------------------------

def test_time_series_validation():
    with pytest.raises(InputError):
        TimeSeries(np.array([1.0, np.inf]))
    with pytest.raises(InputError):
        TimeSeries(np.array([1.0, 2.0]),
                   np.array(["2024-01-01T00:00:00"], dtype="datetime64[s]"))
    ts = np.array(["2024-01-01T00:00:02", "2024-01-01T00:00:01"],
                  dtype="datetime64[s]")
    with pytest.raises(InputError):
        TimeSeries(np.array([1.0, 2.0]), ts)


def test_make_windows_enumeration():
    pairs = make_windows(TimeSeries(np.array([1.0, 2.0, 3.0, 4.0])), 2)
    assert len(pairs) == 2
    np.testing.assert_array_equal(pairs.x, [[1.0, 2.0], [2.0, 3.0]])
    np.testing.assert_array_equal(pairs.labels, [3.0, 4.0])
    np.testing.assert_array_equal(pairs.origin, [0, 1])


def test_make_windows_count_and_constant():
    series = TimeSeries(np.random.default_rng(0).normal(size=500))
    assert len(make_windows(series, 5)) == 495
    const = make_windows(TimeSeries(np.full(4, 7.0)), 2)
    assert np.all(const.labels == 7.0)


def test_make_windows_alignment_invariant():
    rng = np.random.default_rng(4)
    for _ in range(20):
        n = int(rng.integers(5, 60))
        w = int(rng.integers(1, min(6, n)))
        series = TimeSeries(rng.normal(size=n))
        pairs = make_windows(series, w)
        for i in range(len(pairs)):
            assert pairs.labels[i] == series.values[pairs.origin[i] + w]
            np.testing.assert_array_equal(
                pairs.x[i], series.values[pairs.origin[i] : pairs.origin[i] + w])


def test_make_windows_too_short():
    with pytest.raises(InputError):
        make_windows(TimeSeries(np.array([1.0, 2.0])), 2)


def test_split_train_test():
    series = minute_day(n=500)
    train, test = split_train_test(series, 350)
    assert len(train) == 350 and len(test) == 150
    np.testing.assert_array_equal(
        np.concatenate([train.values, test.values]), series.values)
    np.testing.assert_array_equal(
        np.concatenate([train.timestamps, test.timestamps]), series.timestamps)
    one_train, one_test = split_train_test(series, 499)
    assert len(one_test) == 1
    for bad in (0, 500, -3):
        with pytest.raises(InputError):
            split_train_test(series, bad)


# ----------------------------------------------------------------------
# Bootstrap
# ----------------------------------------------------------------------

def test_bootstrap_single_pair():
    pairs = make_windows(TimeSeries(np.array([1.0, 2.0, 3.0])), 2)
    assert len(pairs) == 1
    split = bootstrap_resample(pairs, 3, seed=0)
    np.testing.assert_array_equal(split.bag, [0, 0, 0])
    assert split.oob.size == 0


def test_bootstrap_deterministic_and_partition():
    pairs = make_windows(TimeSeries(np.random.default_rng(1).normal(size=50)), 3)
    a = bootstrap_resample(pairs, 40, seed=99)
    b = bootstrap_resample(pairs, 40, seed=99)
    np.testing.assert_array_equal(a.bag, b.bag)
    np.testing.assert_array_equal(a.oob, b.oob)
    distinct = np.unique(a.bag)
    assert np.intersect1d(distinct, a.oob).size == 0
    np.testing.assert_array_equal(np.union1d(distinct, a.oob), np.arange(len(pairs)))


def test_bootstrap_oob_fraction_near_one_over_e():
    # For n = |pairs| the chance an index is never drawn tends to 1/e.
    series = TimeSeries(np.random.default_rng(2).normal(size=1003))
    pairs = make_windows(series, 3)
    assert len(pairs) == 1000
    fractions = [bootstrap_resample(pairs, 1000, seed=s).oob.size / 1000
                 for s in range(200)]
    assert abs(float(np.mean(fractions)) - 1.0 / math.e) < 0.02


def test_bootstrap_marginals_chi_square():
    # Each index should be drawn with equal probability n/|pairs|.
    series = TimeSeries(np.random.default_rng(3).normal(size=23))
    pairs = make_windows(series, 3)
    size = len(pairs)
    counts = np.zeros(size)
    reps, n = 300, 100
    for s in range(reps):
        bag = bootstrap_resample(pairs, n, seed=1000 + s).bag
        counts += np.bincount(bag, minlength=size)
    expected = reps * n / size
    chi2 = float(np.sum((counts - expected) ** 2 / expected))
    # dof = 19; mean 19, sd ~6.2.  A cap at 60 is ~6 sigma.
    assert chi2 < 60.0


# ----------------------------------------------------------------------
# Preprocessors
# ----------------------------------------------------------------------

def test_at_summary_examples():
    assert at_summary(np.zeros(3)) == 0.0
    assert at_summary(np.array([3.0])) == pytest.approx(math.sqrt(6.0), abs=1e-12)
    assert at_summary(np.array([1.0, 1.0, 1.0])) == pytest.approx(
        math.sqrt(2.0), abs=1e-12)
    with pytest.raises(InputError):
        at_summary(np.array([]))
    with pytest.raises(InputError):
        at_summary(np.array([1.0, np.nan]))


def test_resample_energy_counts_full_day():
    day = minute_day()
    unfiltered = resample_energy(day, apply_filter=False)
    assert len(unfiltered) == 48
    filtered = resample_energy(day)
    assert len(filtered) == 37


def test_resample_energy_drops_the_0530_partial_bucket():
    filtered = resample_energy(minute_day())
    first = filtered.timestamps[0].astype("datetime64[m]")
    last = filtered.timestamps[-1].astype("datetime64[m]")
    assert str(first) == "2024-03-04T06:00"
    assert str(last) == "2024-03-05T00:00"


def test_resample_energy_constant_and_means():
    const = resample_energy(minute_day(values=np.full(1440, 3.25)))
    assert np.all(const.values == 3.25)
    ramp = resample_energy(minute_day(), apply_filter=False)
    # Bucket k averages minutes 30k .. 30k+29 of the ramp 0..1439.
    np.testing.assert_allclose(
        ramp.values, [30 * k + 14.5 for k in range(48)], atol=1e-12)


def test_resample_energy_multiple_days():
    two = minute_day(n=2880)
    filtered = resample_energy(two)
    assert len(filtered) == 74


def test_resample_energy_errors():
    with pytest.raises(InputError):
        resample_energy(TimeSeries(np.arange(10.0)))
    with pytest.raises(ConfigError):
        resample_energy(minute_day(), bucket_minutes=7)
    # A window crossing the service-day boundary cannot be contiguous.
    with pytest.raises(ConfigError):
        resample_energy(minute_day(), service_start="03:00", service_end="05:00")


def test_preprocessors_are_pure():
    day = minute_day()
    a = resample_energy(day)
    b = resample_energy(day)
    np.testing.assert_array_equal(a.values, b.values)
    np.testing.assert_array_equal(a.timestamps, b.timestamps)


# ----------------------------------------------------------------------
# CSV
# ----------------------------------------------------------------------

def test_csv_roundtrip_with_timestamps(tmp_path):
    series = minute_day(n=100, values=np.random.default_rng(5).normal(size=100))
    path = tmp_path / "s.csv"
    write_csv(series, path)
    text = path.read_text()
    assert text.startswith("timestamp,value\n")
    assert "\r" not in text
    back = load_csv(path)
    np.testing.assert_array_equal(back.values, series.values)
    np.testing.assert_array_equal(back.timestamps, series.timestamps)


def test_csv_roundtrip_values_only(tmp_path):
    series = TimeSeries(np.random.default_rng(6).normal(size=100) * 1e-7)
    path = tmp_path / "v.csv"
    write_csv(series, path)
    back = load_csv(path)
    assert back.timestamps is None
    np.testing.assert_array_equal(back.values, series.values)


def test_csv_accepts_headerless_and_crlf(tmp_path):
    path = tmp_path / "h.csv"
    path.write_bytes(b"2024-01-01T00:00:00Z,1.5\r\n2024-01-01T00:01:00Z,2.5\r\n")
    series = load_csv(path)
    assert len(series) == 2 and series.timestamps is not None
    bare = tmp_path / "bare.csv"
    bare.write_text("1.0\n2.0\n")
    assert load_csv(bare).timestamps is None


def test_csv_parse_errors_carry_line_numbers(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("value\n1.0\noops\n")
    with pytest.raises(ParseError, match="line 3"):
        load_csv(path)
    path.write_text("timestamp,value\nnot-a-time,1.0\n")
    with pytest.raises(ParseError, match="line 2"):
        load_csv(path)
    path.write_text("value\n1.0\nnan\n")
    with pytest.raises(InputError):
        load_csv(path)


def test_load_spectra_rows(tmp_path):
    path = tmp_path / "spec.csv"
    path.write_text("2024-01-01T00:00:00Z,1.0,2.0\n2024-01-01T01:00:00Z,3.0\n")
    stamps, rows = load_spectra_csv(path)
    assert len(stamps) == 2 and len(rows) == 2
    np.testing.assert_array_equal(rows[0], [1.0, 2.0])
    bare = tmp_path / "bare.csv"
    bare.write_text("1.0,2.0,3.0\n4.0,5.0\n")
    stamps, rows = load_spectra_csv(bare)
    assert stamps is None and rows[1].size == 2
