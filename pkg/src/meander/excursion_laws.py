"""Laws of the drifted Brownian excursion (a meander pinned at its endpoint).

Pinning both ends removes the drift: every exp(mu ...) factor of the
absorbed kernels telescopes away. Production evaluation therefore runs on
driftless kernels; the ``tilted`` evaluators keep the literal drift factors
and exist so the cancellation can be checked.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .gauss_kernels import LOG_SQRT_2PI, _scalar_or_array, log_absorbed_kernel
from .meander_laws import TimeValueGrid


@dataclass(frozen=True)
class ExcursionSpec:
    """Drift mu, barrier v, start u, endpoint c and horizon t, with u, c > v."""

    drift: float = 0.0
    barrier: float = 0.0
    start: float = 1.0
    endpoint: float = 1.0
    horizon: float = 1.0

    def __post_init__(self):
        if not self.horizon > 0:
            raise DomainError(f"horizon must be positive, got {self.horizon}")
        if not (self.start > self.barrier and self.endpoint > self.barrier):
            raise DomainError("start and endpoint must lie strictly above the barrier")


def _levels(y, v):
    y = np.asarray(y, dtype=float)
    if np.any(y <= v):
        raise DomainError("levels must lie strictly above the barrier")
    return y


def _check_time(s, t):
    if not 0 < s < t:
        raise DomainError(f"time {s} outside (0, {t})")


def log_excursion_marginal_density(spec: ExcursionSpec, s, y, tilted=False):
    t, v, u, c = spec.horizon, spec.barrier, spec.start, spec.endpoint
    _check_time(s, t)
    y = _levels(y, v)
    mu = spec.drift if tilted else 0.0
    out = (log_absorbed_kernel(s, u, y, v, mu) + log_absorbed_kernel(t - s, y, c, v, mu)
           - log_absorbed_kernel(t, u, c, v, mu))
    return _scalar_or_array(out)


def excursion_marginal_density(spec: ExcursionSpec, s, y):
    """Density of the excursion at time s; independent of the drift."""
    return _scalar_or_array(np.exp(log_excursion_marginal_density(spec, s, y)))


def excursion_marginal_density_tilted(spec: ExcursionSpec, s, y):
    """Same law evaluated with the drift factors left in place."""
    return _scalar_or_array(np.exp(log_excursion_marginal_density(spec, s, y, tilted=True)))


def log_excursion_joint_density(spec: ExcursionSpec, grid: TimeValueGrid, tilted=False):
    t, v, u, c = spec.horizon, spec.barrier, spec.start, spec.endpoint
    grid.check(t, v)
    s, y = grid.times, grid.values
    if s[-1] >= t:
        raise DomainError("observation times must lie strictly inside (0, t)")
    mu = spec.drift if tilted else 0.0
    steps = np.diff(np.concatenate(([0.0], s, [t])))
    path = np.concatenate(([u], y, [c]))
    return float(np.sum(log_absorbed_kernel(steps, path[:-1], path[1:], v, mu))
                 - log_absorbed_kernel(t, u, c, v, mu))


def excursion_joint_density(spec: ExcursionSpec, grid: TimeValueGrid):
    return math.exp(log_excursion_joint_density(spec, grid))


def excursion_joint_density_tilted(spec: ExcursionSpec, grid: TimeValueGrid):
    return math.exp(log_excursion_joint_density(spec, grid, tilted=True))


def log_excursion_limit_joint_density(t, grid: TimeValueGrid, mode="both-limits", endpoint=None):
    """Barrier v = 0 limits: start u -> 0 ("start-limit", needs endpoint c) or u, c -> 0 ("both-limits")."""
    if mode not in ("start-limit", "both-limits"):
        raise DomainError(f"unknown mode {mode!r}")
    if mode == "start-limit" and (endpoint is None or not endpoint > 0):
        raise DomainError("start-limit needs a positive endpoint")
    if mode == "both-limits" and endpoint is not None:
        raise DomainError("both-limits takes no endpoint")
    grid.check(t, 0.0)
    s, y = grid.times, grid.values
    if s[-1] >= t:
        raise DomainError("observation times must lie strictly inside (0, t)")
    out = math.log(y[0]) + 1.5 * math.log(t / s[0]) - 0.5 * y[0] ** 2 / s[0]
    if s.size > 1:
        out += float(np.sum(log_absorbed_kernel(np.diff(s), y[:-1], y[1:], 0.0, 0.0)))
    rest = t - s[-1]
    if mode == "start-limit":
        c = endpoint
        out += -math.log(c) + 0.5 * c * c / t
        out += float(log_absorbed_kernel(rest, y[-1], c, 0.0, 0.0))
    else:
        out += math.log(2.0 * y[-1] / rest) - 0.5 * y[-1] ** 2 / rest - 0.5 * math.log(rest) - LOG_SQRT_2PI
    return out


def excursion_limit_joint_density(t, grid: TimeValueGrid, mode="both-limits", endpoint=None):
    """Joint density of the excursion started (and possibly ended) at the barrier 0."""
    return math.exp(log_excursion_limit_joint_density(t, grid, mode, endpoint))


def excursion_limit_marginal_density(t, s, y, mode="both-limits", endpoint=None):
    """Vectorised n = 1 case of excursion_limit_joint_density."""
    _check_time(s, t)
    y = _levels(y, 0.0)
    if mode == "both-limits":
        if endpoint is not None:
            raise DomainError("both-limits takes no endpoint")
        k = t / (s * (t - s))
        return _scalar_or_array(math.sqrt(2 / math.pi) * y * y * k ** 1.5 * np.exp(-0.5 * y * y * k))
    if mode != "start-limit" or endpoint is None or not endpoint > 0:
        raise DomainError("start-limit needs a positive endpoint")
    c = endpoint
    out = (np.log(y) + 1.5 * math.log(t / s) - 0.5 * y * y / s - math.log(c) + 0.5 * c * c / t
           + log_absorbed_kernel(t - s, y, c, 0.0, 0.0))
    return _scalar_or_array(np.exp(out))
