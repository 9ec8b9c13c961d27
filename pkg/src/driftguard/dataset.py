"""Time-series containers, windowing, splits, bootstrap resampling,
CSV input/output and the two case-study preprocessors."""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .errors import ConfigError, InputError, ParseError

MINUTES_PER_DAY = 1440


def _parse_instant(text: str, lineno: int | None = None) -> np.datetime64:
    """ISO-8601 → datetime64[s], treating naive instants as UTC."""
    t = text.strip()
    if t.endswith("Z"):
        t = t[:-1] + "+00:00"
    try:
        dt = datetime.fromisoformat(t)
    except ValueError:
        where = f" at line {lineno}" if lineno is not None else ""
        raise ParseError(f"invalid timestamp {text!r}{where}") from None
    if dt.tzinfo is not None:
        dt = dt.astimezone(timezone.utc).replace(tzinfo=None)
    return np.datetime64(dt, "s")


def _format_instant(ts: np.datetime64) -> str:
    return np.datetime_as_string(ts.astype("datetime64[s]")) + "Z"


def parse_instants(texts) -> np.ndarray:
    """ISO-8601 strings → datetime64[s] array (naive instants are UTC)."""
    return np.array([_parse_instant(t) for t in texts], dtype="datetime64[s]")


def format_instants(stamps: np.ndarray) -> list[str]:
    return [_format_instant(ts) for ts in np.asarray(stamps)]


@dataclass(frozen=True)
class TimeSeries:
    """Ordered observations with optional strictly increasing timestamps."""

    values: np.ndarray
    timestamps: np.ndarray | None = None
    label: str = ""

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "values", values)
        if values.ndim != 1:
            raise InputError("TimeSeries values must be one-dimensional")
        if not np.all(np.isfinite(values)):
            raise InputError("TimeSeries values must be finite")
        if self.timestamps is not None:
            ts = np.asarray(self.timestamps, dtype="datetime64[s]")
            object.__setattr__(self, "timestamps", ts)
            if ts.shape != values.shape:
                raise InputError("timestamps and values differ in length")
            if ts.size > 1 and not np.all(np.diff(ts).astype(np.int64) > 0):
                raise InputError("timestamps must be strictly increasing")

    def __len__(self) -> int:
        return int(self.values.size)


@dataclass(frozen=True)
class WindowedPairs:
    """Moving-window pairs stored columnwise.

    Row i holds the window x[i] (length window_len), its label, and the
    index in the source series where the window starts; the label is the
    source element at origin[i] + window_len.
    """

    window_len: int
    x: np.ndarray        # (n, window_len)
    labels: np.ndarray   # (n,)
    origin: np.ndarray   # (n,) int

    def __len__(self) -> int:
        return int(self.labels.size)

    def take(self, idx: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """(windows, labels) for the given pair indices."""
        return self.x[idx], self.labels[idx]


@dataclass(frozen=True)
class BootstrapSplit:
    """One bootstrap draw: bag indices (with repetition) and the
    out-of-bag complement."""

    bag: np.ndarray   # (n,) int
    oob: np.ndarray   # sorted unique int


def make_windows(series: TimeSeries, w: int) -> WindowedPairs:
    """Restructure a series into ((x_i..x_{i+w-1}), x_{i+w}) pairs."""
    if w < 1:
        raise ConfigError("window length must be >= 1")
    n = len(series)
    if n < w + 1:
        raise InputError(f"series of length {n} too short for window {w}")
    windows = np.lib.stride_tricks.sliding_window_view(series.values, w)[:-1]
    labels = series.values[w:]
    origin = np.arange(n - w)
    return WindowedPairs(w, np.ascontiguousarray(windows), labels.copy(), origin)


def split_train_test(series: TimeSeries, n_train: int) -> tuple[TimeSeries, TimeSeries]:
    """Prefix/suffix split preserving order and timestamps."""
    if not 0 < n_train < len(series):
        raise InputError(f"n_train={n_train} out of range for length {len(series)}")
    ts = series.timestamps
    head = TimeSeries(series.values[:n_train],
                      None if ts is None else ts[:n_train], series.label)
    tail = TimeSeries(series.values[n_train:],
                      None if ts is None else ts[n_train:], series.label)
    return head, tail


def bootstrap_resample(pairs: WindowedPairs, n: int, seed: int) -> BootstrapSplit:
    """Draw n pair indices uniformly with replacement; track out-of-bag."""
    size = len(pairs)
    if size == 0:
        raise InputError("cannot resample an empty pair set")
    if n < 1:
        raise ConfigError("resample size must be >= 1")
    rng = np.random.default_rng(seed)
    bag = rng.integers(0, size, size=n)
    oob = np.setdiff1d(np.arange(size), bag)
    return BootstrapSplit(bag, oob)


# ----------------------------------------------------------------------
# Case-study preprocessors
# ----------------------------------------------------------------------

def at_summary(amplitudes: np.ndarray) -> float:
    """Summarize one vibration spectrum: sqrt(sum of squares / 1.5)."""
    amplitudes = np.asarray(amplitudes, dtype=np.float64)
    if amplitudes.size == 0:
        raise InputError("at_summary: empty spectrum")
    if not np.all(np.isfinite(amplitudes)):
        raise InputError("at_summary: amplitudes must be finite")
    return float(np.sqrt(np.sum(amplitudes * amplitudes) / 1.5))


def _parse_clock(text: str) -> int:
    """'HH:MM' → minutes since midnight."""
    try:
        hours, minutes = text.split(":")
        value = int(hours) * 60 + int(minutes)
    except ValueError:
        raise ConfigError(f"invalid clock time {text!r}, expected HH:MM") from None
    if not 0 <= value < MINUTES_PER_DAY:
        raise ConfigError(f"clock time {text!r} out of range")
    return value


def resample_energy(minutes: TimeSeries,
                    service_start: str = "05:30",
                    service_end: str = "00:30",
                    bucket_minutes: int = 30,
                    day_start: str = "04:00",
                    apply_filter: bool = True) -> TimeSeries:
    """Average minute-level readings into fixed buckets and drop buckets
    outside the working window.

    The service day runs from day_start to day_start next day, so a
    working window that crosses midnight (05:30 to 00:30) stays
    contiguous.  A bucket covering [s, s+bucket) is kept when that span
    lies strictly inside the open working interval: s > service_start
    and s+bucket <= service_end.  With 30-minute buckets and the default
    window this keeps 37 of the 48 buckets of a full day, dropping the
    partial bucket that starts exactly at 05:30.
    """
    if minutes.timestamps is None:
        raise InputError("resample_energy requires timestamps")
    if bucket_minutes < 1 or MINUTES_PER_DAY % bucket_minutes != 0:
        raise ConfigError("bucket_minutes must divide a day evenly")
    day0 = _parse_clock(day_start)
    svc_s = (_parse_clock(service_start) - day0) % MINUTES_PER_DAY
    svc_e = (_parse_clock(service_end) - day0) % MINUTES_PER_DAY
    if apply_filter and svc_e <= svc_s:
        raise ConfigError("working window must fit inside one service day")

    epoch_min = minutes.timestamps.astype("datetime64[m]").astype(np.int64)
    bucket_ids = epoch_min // bucket_minutes
    starts_at = np.flatnonzero(np.r_[True, np.diff(bucket_ids) != 0])
    sums = np.add.reduceat(minutes.values, starts_at)
    counts = np.diff(np.r_[starts_at, epoch_min.size])
    means = sums / counts
    bucket_start_min = bucket_ids[starts_at] * bucket_minutes

    if apply_filter:
        rel = (bucket_start_min % MINUTES_PER_DAY - day0) % MINUTES_PER_DAY
        keep = (rel > svc_s) & (rel + bucket_minutes <= svc_e)
        means = means[keep]
        bucket_start_min = bucket_start_min[keep]

    stamps = (bucket_start_min * 60).astype("datetime64[s]")
    return TimeSeries(means, stamps, minutes.label)


# ----------------------------------------------------------------------
# CSV input/output
# ----------------------------------------------------------------------

def load_csv(path: str | Path) -> TimeSeries:
    """Read a series file: optional header, `timestamp,value` or `value`
    rows, UTF-8, LF or CRLF."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from None
    values: list[float] = []
    stamps: list[np.datetime64] = []
    has_stamps: bool | None = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if lineno == 1 and line.lower() in ("value", "timestamp,value"):
            has_stamps = line.lower() != "value"
            continue
        fields = line.split(",")
        if has_stamps is None:
            has_stamps = len(fields) == 2
        if len(fields) != (2 if has_stamps else 1):
            raise ParseError(f"{path}: wrong number of columns at line {lineno}")
        try:
            value = float(fields[-1])
        except ValueError:
            raise ParseError(f"{path}: invalid value {fields[-1]!r} at line {lineno}") from None
        if not np.isfinite(value):
            raise InputError(f"{path}: non-finite value at line {lineno}")
        values.append(value)
        if has_stamps:
            stamps.append(_parse_instant(fields[0], lineno))
    if not values:
        raise ParseError(f"{path}: no data rows")
    return TimeSeries(np.array(values),
                      np.array(stamps, dtype="datetime64[s]") if has_stamps else None,
                      label=path.stem)


def write_csv(series: TimeSeries, path: str | Path) -> None:
    """Emit LF-terminated CSV with header and 17-significant-digit values."""
    lines = []
    if series.timestamps is not None:
        lines.append("timestamp,value")
        for ts, v in zip(series.timestamps, series.values):
            lines.append(f"{_format_instant(ts)},{format(v, '.17g')}")
    else:
        lines.append("value")
        for v in series.values:
            lines.append(format(v, ".17g"))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def load_spectra_csv(path: str | Path) -> tuple[list[np.datetime64] | None, list[np.ndarray]]:
    """Read one spectrum per row: optional leading timestamp column,
    then that row's amplitudes (rows may differ in length)."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from None
    stamps: list[np.datetime64] = []
    rows: list[np.ndarray] = []
    has_stamps: bool | None = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        fields = line.split(",")
        if has_stamps is None:
            try:
                float(fields[0])
                has_stamps = False
            except ValueError:
                has_stamps = True
        start = 1 if has_stamps else 0
        if has_stamps:
            stamps.append(_parse_instant(fields[0], lineno))
        try:
            row = np.array([float(f) for f in fields[start:]], dtype=np.float64)
        except ValueError:
            raise ParseError(f"{path}: invalid amplitude at line {lineno}") from None
        if row.size == 0:
            raise ParseError(f"{path}: empty spectrum at line {lineno}")
        rows.append(row)
    if not rows:
        raise ParseError(f"{path}: no data rows")
    return (stamps if has_stamps else None), rows
