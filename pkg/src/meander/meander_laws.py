"""Densities of the drifted Brownian meander.

Two families: the meander started at u above the barrier v, and its weak
limit as u decreases to v ("at the barrier"). All evaluators work in log
space and exponentiate at the end.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError
from .gauss_kernels import (
    _scalar_or_array,
    log_absorbed_kernel,
    log_rayleigh_exp_normalizer,
    log_survival,
)


@dataclass(frozen=True)
class MeanderSpec:
    """Drift mu, barrier v, horizon t and start u; ``start=None`` means at the barrier."""

    drift: float = 0.0
    barrier: float = 0.0
    start: float | None = None
    horizon: float = 1.0

    def __post_init__(self):
        if not self.horizon > 0:
            raise DomainError(f"horizon must be positive, got {self.horizon}")
        if self.start is not None and not self.start > self.barrier:
            raise DomainError("start must lie strictly above the barrier")

    @property
    def at_barrier(self):
        return self.start is None


@dataclass(frozen=True)
class TimeValueGrid:
    """Observation times s_1 < ... < s_n and levels y_1, ..., y_n."""

    times: np.ndarray = field(default_factory=lambda: np.empty(0))
    values: np.ndarray = field(default_factory=lambda: np.empty(0))

    def __post_init__(self):
        times = np.atleast_1d(np.asarray(self.times, dtype=float))
        values = np.atleast_1d(np.asarray(self.values, dtype=float))
        if times.shape != values.shape or times.ndim != 1 or times.size == 0:
            raise DomainError("times and values must be non-empty 1-d sequences of equal length")
        if times[0] <= 0 or np.any(np.diff(times) <= 0):
            raise DomainError("times must be positive and strictly increasing")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)

    def check(self, horizon, barrier):
        if self.times[-1] > horizon:
            raise DomainError("observation times must not exceed the horizon")
        if np.any(self.values <= barrier):
            raise DomainError("values must lie strictly above the barrier")


def _levels(y, v):
    y = np.asarray(y, dtype=float)
    if np.any(y <= v):
        raise DomainError("levels must lie strictly above the barrier")
    return y


def _check_time(s, t):
    if not 0 <= s <= t:
        raise DomainError(f"time {s} outside [0, {t}]")


def _require_above(spec):
    if spec.at_barrier:
        raise DomainError("this law needs a start strictly above the barrier")


def _require_barrier(spec):
    if not spec.at_barrier:
        raise DomainError("this law needs the start at the barrier")


# ---------------------------------------------------------------------------
# started above the barrier


def log_marginal_density(spec: MeanderSpec, s, y):
    _require_above(spec)
    t, u, v, mu = spec.horizon, spec.start, spec.barrier, spec.drift
    _check_time(s, t)
    y = _levels(y, v)
    if s == 0:
        return _scalar_or_array(np.full(y.shape, -np.inf))
    out = log_absorbed_kernel(s, u, y, v, mu) - log_survival(t, u, v, mu)
    if s < t:
        out = out + log_survival(t - s, y, v, mu)
    return _scalar_or_array(out)


def marginal_density(spec: MeanderSpec, s, y):
    """Density of B(s) given min over [0, t] above v, started at u.

    s = t gives the endpoint law; s = 0 gives zero for every y > v.
    """
    return _scalar_or_array(np.exp(log_marginal_density(spec, s, y)))


def endpoint_density(spec: MeanderSpec, y):
    """Endpoint law of the meander for either kind of start."""
    if spec.at_barrier:
        return endpoint_density_at_barrier(spec, y)
    return marginal_density(spec, spec.horizon, y)


# ---------------------------------------------------------------------------
# started at the barrier


def log_barrier_marginal(t, s, a, mu):
    """log density at s of the barrier-start meander at height a = y - v; broadcasts in mu."""
    a = np.asarray(a, dtype=float)
    mu = np.asarray(mu, dtype=float)
    if s == t:
        return log_barrier_endpoint(t, a, mu)
    tau = t - s
    log_h = 0.5 * mu * mu * tau + mu * a + log_survival(tau, a, 0.0, mu)
    return (1.5 * np.log(t / s) + np.log(a) - 0.5 * a * a / s
            - log_rayleigh_exp_normalizer(t, mu) + log_h)


def log_barrier_endpoint(t, a, mu):
    a = np.asarray(a, dtype=float)
    mu = np.asarray(mu, dtype=float)
    return np.log(a) - 0.5 * a * a / t + mu * a - log_rayleigh_exp_normalizer(t, mu)


def marginal_density_at_barrier(spec: MeanderSpec, s, y):
    """Density of B(s) for the meander started at the barrier (limit u -> v)."""
    _require_barrier(spec)
    t, v = spec.horizon, spec.barrier
    _check_time(s, t)
    y = _levels(y, v)
    if s == 0:
        return _scalar_or_array(np.zeros(y.shape))
    return _scalar_or_array(np.exp(log_barrier_marginal(t, s, y - v, spec.drift)))


def endpoint_density_at_barrier(spec: MeanderSpec, y):
    """Exponentially tilted Rayleigh law of B(t); mu = 0 gives the truncated Rayleigh law."""
    _require_barrier(spec)
    y = _levels(y, spec.barrier)
    return _scalar_or_array(np.exp(log_barrier_endpoint(spec.horizon, y - spec.barrier, spec.drift)))


def endpoint_mode_at_barrier(spec: MeanderSpec):
    """Root of 1/a - a/t + mu = 0, shifted by the barrier."""
    _require_barrier(spec)
    t, mu = spec.horizon, spec.drift
    a = 0.5 * (mu * t + np.sqrt(mu * mu * t * t + 4.0 * t))
    return spec.barrier + a


def density(spec: MeanderSpec, s, y):
    """Marginal density for either kind of start."""
    if spec.at_barrier:
        return marginal_density_at_barrier(spec, s, y)
    return marginal_density(spec, s, y)


# ---------------------------------------------------------------------------
# finite-dimensional laws


def log_joint_density(spec: MeanderSpec, grid: TimeValueGrid):
    t, v, mu = spec.horizon, spec.barrier, spec.drift
    grid.check(t, v)
    s, y = grid.times, grid.values
    if s.size == 1:
        if spec.at_barrier:
            return float(log_barrier_marginal(t, s[0], y[0] - v, mu))
        return float(log_marginal_density(spec, s[0], y[0]))
    if spec.at_barrier:
        a1 = y[0] - v
        out = 1.5 * np.log(t / s[0]) + np.log(a1) - 0.5 * a1 * a1 / s[0] - log_rayleigh_exp_normalizer(t, mu)
        out += np.sum(log_absorbed_kernel(np.diff(s), y[:-1], y[1:], v, 0.0))
        a_n = y[-1] - v
        if s[-1] < t:
            tau = t - s[-1]
            out += 0.5 * mu * mu * tau + mu * a_n + log_survival(tau, a_n, 0.0, mu)
        else:
            out += mu * a_n
        return float(out)
    steps = np.diff(np.concatenate(([0.0], s)))
    starts = np.concatenate(([spec.start], y[:-1]))
    out = np.sum(log_absorbed_kernel(steps, starts, y, v, mu)) - log_survival(t, spec.start, v, mu)
    if s[-1] < t:
        out += log_survival(t - s[-1], y[-1], v, mu)
    return float(out)


def joint_density(spec: MeanderSpec, grid: TimeValueGrid):
    """Joint density of (B(s_1), ..., B(s_n)) under the meander law."""
    return float(np.exp(log_joint_density(spec, grid)))
