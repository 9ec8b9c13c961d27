"""AR(1)-GARCH(1,1) simulation with an optional post-change mean shift,
plus the benchmark seed schedules and the experiment grid.

The data-generating process is

    x_t = phi * x_{t-1} + eps_t,   eps_t = sigma_t * z_t,
    sigma^2_t = alpha0 + alpha1 * eps^2_{t-1} + beta * sigma^2_{t-1},

with z_t i.i.d. standard normal.  sigma^2 starts at the stationary
value alpha0 / (1 - alpha1 - beta) and x_0 = eps_0 = 0; a burn-in
prefix is discarded so the reported series starts near stationarity.

The mean shift enters the AR recursion: from t = tau (1-based) on, the
driving term becomes eps_t + delta, so the first shifted point moves by
exactly delta and the process mean drifts toward delta / (1 - phi).  A
one-step-ahead forecaster therefore keeps seeing the full delta in its
residuals instead of absorbing the shift into the next window.  The
volatility recursion stays on the unshifted eps path, so the shift
changes the level only; pre-change points are untouched.

Normal variates come from a counter-based generator (Philox) through
the inverse normal CDF, so streams reproduce exactly across platforms.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

from .dataset import TimeSeries
from .errors import ConfigError

PHI_GRID = (0.1, 0.5, 0.9)
DELTA_GRID = (0.0, 0.25, 0.5, 0.75, 1.0, 1.5, 2.0)


@dataclass(frozen=True)
class SimConfig:
    phi: float
    delta: float = 0.0
    seed: int = 0
    length: int = 500
    tau: int = 401
    alpha0: float = 0.1
    alpha1: float = 0.1
    beta: float = 0.8
    burn_in: int = 200

    def __post_init__(self) -> None:
        if not abs(self.phi) < 1.0:
            raise ConfigError("|phi| must be < 1 for stationarity")
        if self.alpha0 <= 0.0:
            raise ConfigError("alpha0 must be positive")
        if self.alpha1 < 0.0 or self.beta < 0.0:
            raise ConfigError("alpha1 and beta must be non-negative")
        if self.alpha1 + self.beta >= 1.0:
            raise ConfigError("alpha1 + beta must be < 1 for stationarity")
        if self.length < 1:
            raise ConfigError("length must be >= 1")
        if not 1 <= self.tau <= self.length:
            raise ConfigError("tau must lie in [1, length]")
        if self.seed < 0:
            raise ConfigError("seed must be non-negative")
        if self.burn_in < 0:
            raise ConfigError("burn_in must be non-negative")


def shift_offsets(phi: float, delta: float, count: int) -> np.ndarray:
    """Deterministic drift a sustained shift adds to the raw series.

    Superposing x'_t = phi * x'_{t-1} + eps_t + delta on the delta = 0
    path gives x'_{tau+k} - x_{tau+k} = delta * sum_{j<=k} phi^j, so the
    shifted series is the base series plus these offsets."""
    return delta * np.cumsum(phi ** np.arange(count))


def generate(cfg: SimConfig) -> TimeSeries:
    """Simulate one series under cfg; same config, same output."""
    total = cfg.burn_in + cfg.length
    gen = np.random.Generator(np.random.Philox(cfg.seed))
    # (k + 0.5) / 2^53 keeps uniforms strictly inside (0, 1).
    uniforms = (gen.integers(0, 2**53, size=total, dtype=np.int64) + 0.5) / 2**53
    z = ndtri(uniforms)

    out = np.empty(total)
    sigma2 = cfg.alpha0 / (1.0 - cfg.alpha1 - cfg.beta)
    x = 0.0
    for t in range(total):
        eps = np.sqrt(sigma2) * z[t]
        x = cfg.phi * x + eps
        out[t] = x
        sigma2 = cfg.alpha0 + cfg.alpha1 * eps * eps + cfg.beta * sigma2

    values = out[cfg.burn_in :]
    if cfg.delta != 0.0:
        values[cfg.tau - 1 :] += shift_offsets(cfg.phi, cfg.delta,
                                               cfg.length - cfg.tau + 1)
    label = f"ar_garch_phi{cfg.phi:g}_delta{cfg.delta:g}_seed{cfg.seed}"
    return TimeSeries(values, label=label)


def seed_schedule(kind: str) -> list[int]:
    """The two benchmark seed lists (1000 seeds each)."""
    if kind == "main":
        return list(range(20000, 120000, 100))
    if kind == "appendix":
        return list(range(200, 3200, 3))
    raise ConfigError(f"unknown seed schedule {kind!r}")


def experiment_grid(phis=PHI_GRID, deltas=DELTA_GRID,
                    seeds: list[int] | None = None,
                    schedule: str = "main",
                    count: int | None = None,
                    **sim_kwargs) -> list[SimConfig]:
    """Cartesian product of phi x delta x seed, ordered phi-major.

    seeds defaults to the named schedule; count keeps only its first
    `count` seeds for desk-scale runs.  Extra keyword arguments pass
    through to SimConfig (length, tau, GARCH parameters).
    """
    if seeds is None:
        seeds = seed_schedule(schedule)
    if count is not None:
        if count < 1:
            raise ConfigError("count must be >= 1")
        seeds = seeds[:count]
    return [SimConfig(phi=phi, delta=delta, seed=seed, **sim_kwargs)
            for phi in phis for delta in deltas for seed in seeds]
