"""Run-level detection metrics and their aggregation into report tables.

Conventions (1-based time):
  FAP    fraction of runs whose first alarm lands before tau.
  DR     fraction of runs with at least one alarm in [tau, T].
  CED    mean of (first alarm >= tau) - tau over runs that have such an
         alarm; undefined (None) when no run qualifies.  A run whose
         first alarm fell before tau still qualifies through its first
         post-change alarm, since the chart is never reset.
  Recall percentage of the post-change points tau..T (inclusive, so
         T - tau + 1 points) that alarm, averaged over runs.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .errors import InputError


@dataclass(frozen=True)
class RunOutcome:
    """Alarm positions of one monitored run."""

    tau: int
    length: int
    alarms: tuple[int, ...]

    def __post_init__(self) -> None:
        if not 1 <= self.tau <= self.length:
            raise InputError("tau must lie in [1, length]")
        alarms = tuple(int(a) for a in self.alarms)
        object.__setattr__(self, "alarms", alarms)
        if any(not 1 <= a <= self.length for a in alarms):
            raise InputError("alarm indices must lie in [1, length]")
        if any(b <= a for a, b in zip(alarms, alarms[1:])):
            raise InputError("alarm indices must be strictly increasing")

    @property
    def first_alarm(self) -> int | None:
        return self.alarms[0] if self.alarms else None

    @property
    def first_post_change_alarm(self) -> int | None:
        post = [a for a in self.alarms if a >= self.tau]
        return post[0] if post else None


def fap(runs: Sequence[RunOutcome]) -> float:
    """Fraction of runs alarming before their change point."""
    if not runs:
        raise InputError("fap: empty run set")
    hits = sum(1 for r in runs
               if r.first_alarm is not None and r.first_alarm < r.tau)
    return hits / len(runs)


def ced(runs: Sequence[RunOutcome]) -> float | None:
    """Mean detection delay conditional on a post-change alarm, or None
    when no run has one."""
    delays = [r.first_post_change_alarm - r.tau for r in runs
              if r.first_post_change_alarm is not None]
    if not delays:
        return None
    return sum(delays) / len(delays)


def dr(runs: Sequence[RunOutcome]) -> float:
    """Fraction of runs with any alarm in [tau, T]."""
    if not runs:
        raise InputError("dr: empty run set")
    hits = sum(1 for r in runs if r.first_post_change_alarm is not None)
    return hits / len(runs)


def recall(run: RunOutcome) -> float:
    """Percent of post-change points (tau..T inclusive) that alarm."""
    post_points = run.length - run.tau + 1
    hits = sum(1 for a in run.alarms if a >= run.tau)
    return 100.0 * hits / post_points


def mean_recall(runs: Sequence[RunOutcome]) -> float:
    if not runs:
        raise InputError("mean_recall: empty run set")
    return sum(recall(r) for r in runs) / len(runs)


@dataclass(frozen=True)
class MetricsReport:
    model: str
    phi: float
    delta: float
    reps: int
    fap: float
    dr: float
    ced: float | None
    recall: float


def summarize(model: str, phi: float, delta: float,
              runs: Sequence[RunOutcome]) -> MetricsReport:
    """All four metrics for one homogeneous group of runs."""
    if not runs:
        raise InputError("summarize: empty run set")
    shapes = {(r.tau, r.length) for r in runs}
    if len(shapes) > 1:
        raise InputError(f"mixed (tau, length) within group {model}/{phi}/{delta}")
    return MetricsReport(model, phi, delta, len(runs),
                         fap(runs), dr(runs), ced(runs), mean_recall(runs))


def aggregate(records: Iterable[tuple[str, float, float, RunOutcome]],
              model_order: Sequence[str] | None = None) -> list[MetricsReport]:
    """Group (model, phi, delta, outcome) records and summarize each group.

    Rows are ordered by (phi, delta, model); model order follows
    model_order when given, else alphabetical.  Run order within a group
    never affects the result.
    """
    groups: dict[tuple[str, float, float], list[RunOutcome]] = {}
    for model, phi, delta, outcome in records:
        groups.setdefault((model, float(phi), float(delta)), []).append(outcome)
    if not groups:
        raise InputError("aggregate: no records")

    def model_rank(name: str):
        if model_order is not None:
            try:
                return (0, model_order.index(name))
            except ValueError:
                return (1, name)
        return (1, name)

    keys = sorted(groups, key=lambda k: (k[1], k[2], model_rank(k[0])))
    return [summarize(m, phi, delta, groups[(m, phi, delta)])
            for m, phi, delta in keys]


REPORT_HEADER = "model,phi,delta,reps,FAP,DR,CED,Recall"


def write_report_csv(reports: Sequence[MetricsReport], path: str | Path) -> None:
    """Emit the report table; CED is an empty field when undefined.
    Fixed 4-decimal formatting keeps repeated runs byte-identical."""
    lines = [REPORT_HEADER]
    for r in reports:
        ced_field = "" if r.ced is None else format(r.ced, ".4f")
        lines.append(",".join([
            r.model,
            format(r.phi, "g"),
            format(r.delta, "g"),
            str(r.reps),
            format(r.fap, ".4f"),
            format(r.dr, ".4f"),
            ced_field,
            format(r.recall, ".4f"),
        ]))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")
