"""Shewhart-type prediction-interval chart and Phase II monitoring.

Each monitorable point gets its own limits f_hat +/- z*s computed from
the preceding w observed values; a point on a limit counts as in
control.  The chart holds no state, so it is never reset after alarms,
and windows always contain observed values, never model predictions.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dataset import TimeSeries
from .ensemble import UncertaintyBundle, predict_total_std_batch
from .errors import ConfigError, DomainError, InputError, ParseError


@dataclass(frozen=True)
class ChartConfig:
    """z is the standard-normal quantile scaling the interval half-width;
    the default 2.326 targets a two-sided per-point rate of about 0.02.
    window, when set, must agree with the bundle and exists so chart
    settings can be round-tripped through config files."""

    z: float = 2.326
    window: int | None = None

    def __post_init__(self) -> None:
        if self.z <= 0.0:
            raise ConfigError("z must be positive")
        if self.window is not None and self.window < 1:
            raise ConfigError("window must be positive")


@dataclass(frozen=True)
class AlarmRecord:
    index: int          # 1-based position in the monitored series
    value: float
    f_hat: float
    s: float
    lcl: float
    ucl: float
    in_control: bool


def limits(f_hat: float, s: float, z: float) -> tuple[float, float]:
    """(lcl, ucl) = f_hat -/+ z*s."""
    if s <= 0.0:
        raise DomainError("interval scale s must be positive")
    if z <= 0.0:
        raise ConfigError("z must be positive")
    half = z * s
    return f_hat - half, f_hat + half


def monitor(bundle: UncertaintyBundle, series: TimeSeries,
            cfg: ChartConfig = ChartConfig()) -> list[AlarmRecord]:
    """Classify every monitorable point of the series.

    Point k (1-based, k >= w+1) is judged against limits built from the
    window of observed values k-w..k-1.  Returns one record per
    monitorable point, in order.
    """
    w = bundle.window
    if cfg.window is not None and cfg.window != w:
        raise ConfigError(f"chart window {cfg.window} != bundle window {w}")
    values = series.values
    if values.size < w + 1:
        raise InputError(f"series of length {values.size} too short for window {w}")
    windows = np.lib.stride_tricks.sliding_window_view(values, w)[:-1]
    monitored = values[w:]
    f_hat, s = predict_total_std_batch(bundle, windows)
    if np.any(s <= 0.0):
        raise DomainError("monitoring produced a nonpositive interval scale")
    half = cfg.z * s
    lcl = f_hat - half
    ucl = f_hat + half
    in_control = (monitored >= lcl) & (monitored <= ucl)
    return [AlarmRecord(w + 1 + k, float(monitored[k]), float(f_hat[k]),
                        float(s[k]), float(lcl[k]), float(ucl[k]),
                        bool(in_control[k]))
            for k in range(monitored.size)]


def first_alarm(records: list[AlarmRecord]) -> int | None:
    """Smallest record index flagged out-of-control, or None."""
    alarmed = [r.index for r in records if not r.in_control]
    return min(alarmed) if alarmed else None


def alarm_indices(records: list[AlarmRecord]) -> list[int]:
    return [r.index for r in records if not r.in_control]


# ----------------------------------------------------------------------
# Alarm output formats
# ----------------------------------------------------------------------

ALARM_HEADER = "index,value,f_hat,s,lcl,ucl,in_control"


def write_alarms_csv(records: list[AlarmRecord], path: str | Path) -> None:
    lines = [ALARM_HEADER]
    for r in records:
        lines.append(",".join([
            str(r.index),
            format(r.value, ".17g"),
            format(r.f_hat, ".17g"),
            format(r.s, ".17g"),
            format(r.lcl, ".17g"),
            format(r.ucl, ".17g"),
            "true" if r.in_control else "false",
        ]))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def load_alarms_csv(path: str | Path) -> list[AlarmRecord]:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from None
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0].strip() != ALARM_HEADER:
        raise ParseError(f"{path}: missing alarm header")
    records = []
    for lineno, line in enumerate(lines[1:], start=2):
        fields = line.split(",")
        if len(fields) != 7 or fields[6] not in ("true", "false"):
            raise ParseError(f"{path}: malformed row at line {lineno}")
        try:
            records.append(AlarmRecord(
                int(fields[0]), float(fields[1]), float(fields[2]),
                float(fields[3]), float(fields[4]), float(fields[5]),
                fields[6] == "true"))
        except ValueError:
            raise ParseError(f"{path}: malformed row at line {lineno}") from None
    return records


def alarms_to_json(records: list[AlarmRecord]) -> list[dict]:
    return [{"index": r.index, "value": r.value, "f_hat": r.f_hat, "s": r.s,
             "lcl": r.lcl, "ucl": r.ucl, "in_control": r.in_control}
            for r in records]


def write_alarms_json(records: list[AlarmRecord], path: str | Path) -> None:
    Path(path).write_text(json.dumps(alarms_to_json(records)) + "\n")
