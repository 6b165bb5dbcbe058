"""Running maximum of the drifted meander and first passage above a level.

The two-barrier kernel carries the drift through the Girsanov factor
exp(mu (y - u) - mu^2 s / 2), the same for every image term. Barrier-start
laws are ratios of u-derivatives at u = v:

    d/du band kernel   -> 2 exp(mu a - mu^2 s/2) sum_k (a - 2kL)/s phi_s(a - 2kL)
    d/du survival      -> 2 (phi(z) + z Phi(z)) / sqrt(t),   z = mu sqrt(t)

with a = y - v and L = x - v.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .errors import DomainError
from .gauss_kernels import (
    DEFAULT_NUMERICS,
    band_kernel,
    integrate_interval,
    log_barrier_survival_slope,
    log_norm_interval,
    log_rayleigh_exp_normalizer,
    log_survival,
    sum_one_sided,
    sum_two_sided,
)
from .meander_laws import MeanderSpec

# below this ratio L / sqrt(t) the image series is replaced by its sine expansion
JACOBI_SWITCH = 0.05


@dataclass(frozen=True)
class MaxQuery:
    """P(max over [0, upto] < level); ``upto=None`` means the horizon."""

    spec: MeanderSpec
    level: float
    upto: float | None = None

    def __post_init__(self):
        s = self.spec
        if self.upto is None:
            object.__setattr__(self, "upto", s.horizon)
        if not self.level > s.barrier:
            raise DomainError("level must lie above the barrier")
        if not s.at_barrier and not self.level > s.start:
            raise DomainError("level must lie above the start")
        if not 0 < self.upto <= s.horizon:
            raise DomainError("upto must lie in (0, horizon]")


@dataclass(frozen=True)
class FptQuery:
    """First passage above ``level`` for the process conditioned up to t and free until t'."""

    spec: MeanderSpec
    level: float
    extended_horizon: float
    at: float

    def __post_init__(self):
        s = self.spec
        if not self.extended_horizon > s.horizon:
            raise DomainError("extended horizon t' must exceed the horizon t")
        if not self.level > s.barrier:
            raise DomainError("level must lie above the barrier")
        if not 0 < self.at <= self.extended_horizon:
            raise DomainError("time must lie in (0, t']")


# ---------------------------------------------------------------------------
# kernels


def barrier_band_kernel(s, a, width, mu=0.0, cfg=DEFAULT_NUMERICS):
    """exp(mu a - mu^2 s/2) * sum_k (a - 2kL)/s phi_s(a - 2kL), the band kernel slope at the barrier."""
    a = np.asarray(a, dtype=float)
    L = float(width)
    if L * L >= s:
        def image(k):
            z = a - 2 * k * L
            return z / s * np.exp(-0.5 * z * z / s) / math.sqrt(2 * math.pi * s)

        core = sum_two_sided(image, cfg)
    else:
        def mode(n):
            w = n * math.pi / L
            return w / L * math.exp(-0.5 * w * w * s) * np.sin(w * a)

        core = sum_one_sided(mode, cfg)
    return np.maximum(core, 0.0) * np.exp(mu * a - 0.5 * mu * mu * s)


def _log_half_slope(t, mu):
    return log_barrier_survival_slope(t, mu) - math.log(2.0)


def band_mass(t, u, v, x, mu=0.0, cfg=DEFAULT_NUMERICS):
    """Integral over y in (v, x) of the band kernel from u in time t, in closed form."""
    L = x - v
    d = u - v
    st = math.sqrt(t)
    if L < JACOBI_SWITCH * st:
        growth = math.exp(mu * L)

        def mode(n):
            k = n * math.pi / L
            return (2.0 / L) * math.sin(k * d) * math.exp(-0.5 * k * k * t) * k * (1 - (-1) ** n * growth) / (mu * mu + k * k)

        return float(sum_one_sided(mode, cfg) * math.exp(-mu * d - 0.5 * mu * mu * t))

    def image(k):
        c1 = u + 2 * k * L
        c2 = 2 * v - u + 2 * k * L
        l1 = mu * (c1 - u) + log_norm_interval((v - c1 - mu * t) / st, (x - c1 - mu * t) / st)
        l2 = mu * (c2 - u) + log_norm_interval((v - c2 - mu * t) / st, (x - c2 - mu * t) / st)
        return math.exp(l1) - math.exp(l2)

    return float(sum_two_sided(image, cfg))


# ---------------------------------------------------------------------------
# maximum


def max_cdf(q: MaxQuery, cfg=DEFAULT_NUMERICS):
    """P(max over [0, s] < x | min over [0, t] > v, start u)."""
    spec = q.spec
    if spec.at_barrier:
        raise DomainError("use max_cdf_at_barrier for a barrier start")
    t, u, v, mu, x, s = spec.horizon, spec.start, spec.barrier, spec.drift, q.level, q.upto
    log_norm = log_survival(t, u, v, mu)
    if s == t:
        val = band_mass(t, u, v, x, mu, cfg) / math.exp(log_norm)
    else:
        def integrand(y):
            return band_kernel(s, u, y, v, x, mu, cfg) * np.exp(log_survival(t - s, y, v, mu) - log_norm)

        scale = 0.5 * min(math.sqrt(s), math.sqrt(t - s), x - v)
        val = integrate_interval(integrand, v, x, cfg, scale=scale)
    return float(min(max(val, 0.0), 1.0))


def max_cdf_at_barrier_general(t, v, x, mu=0.0, cfg=DEFAULT_NUMERICS):
    """Barrier start, s = t, by term-wise integration of the image series."""
    L = x - v
    st = math.sqrt(t)
    log_scale = math.log(t) - log_rayleigh_exp_normalizer(t, mu)
    log_gauss = 0.5 * mu * mu * t + math.log(t) + 0.5 * math.log(2 * math.pi * t) - log_rayleigh_exp_normalizer(t, mu)

    def term(k):
        c = 2 * k * L
        edge = math.exp(-0.5 * c * c / t + log_scale) - math.exp(-0.5 * (L - c) ** 2 / t + mu * L + log_scale)
        if mu == 0:
            return edge
        lni = log_norm_interval((-c - mu * t) / st, (L - c - mu * t) / st)
        return edge + mu * math.exp(mu * c + log_gauss + lni)

    return float(min(max(sum_two_sided(term, cfg), 0.0), 1.0))


def max_cdf_at_barrier_v0(t, x, mu=0.0, cfg=DEFAULT_NUMERICS):
    """Barrier start at v = 0, s = t: theta part plus the folded exponential integral.

    fold(w) reflects w into [0, x]: w - jx on even segments j, (j+1)x - w on odd ones.
    """
    log_scale = math.log(t) - log_rayleigh_exp_normalizer(t, mu)

    def theta(r):
        odd = r % 2
        return (-1) ** odd * math.exp(mu * x * odd - 0.5 * x * x * r * r / t + log_scale)

    total = sum_two_sided(theta, cfg)
    if mu != 0:
        st = math.sqrt(t)
        log_gauss = 0.5 * mu * mu * t + 0.5 * math.log(2 * math.pi * t) + log_scale

        def segment(j):
            if j % 2 == 0:
                lni = log_norm_interval((j * x - mu * t) / st, ((j + 1) * x - mu * t) / st)
                return mu * math.exp(-mu * j * x + log_gauss + lni)
            lni = log_norm_interval((j * x + mu * t) / st, ((j + 1) * x + mu * t) / st)
            return mu * math.exp(mu * (j + 1) * x + log_gauss + lni)

        total += sum_one_sided(segment, cfg, start=0)
    return float(min(max(total, 0.0), 1.0))


def max_cdf_at_barrier_spectral(t, v, x, mu=0.0, cfg=DEFAULT_NUMERICS):
    """Barrier start, s = t, from the sine expansion; the Jacobi-transformed series.

    At mu = 0 this is (sqrt(8 pi t)/L) sum_{n odd} exp(-n^2 pi^2 t / (2 L^2)).
    """
    L = x - v
    log_pref = math.log(t) + 0.5 * math.log(2 * math.pi * t) - math.log(L) - log_rayleigh_exp_normalizer(t, mu)
    growth = math.exp(mu * L)

    def mode(n):
        k = n * math.pi / L
        lead = -0.5 * k * k * t + log_pref
        if lead < -745:
            return 0.0
        return k * k / (mu * mu + k * k) * (1 - (-1) ** n * growth) * math.exp(lead)

    return float(min(max(sum_one_sided(mode, cfg), 0.0), 1.0))


def max_cdf_at_barrier(q: MaxQuery, cfg=DEFAULT_NUMERICS):
    """P(max over [0, s] < x | barrier start, min over (0, t) > v)."""
    spec = q.spec
    if not spec.at_barrier:
        raise DomainError("use max_cdf for a start above the barrier")
    t, v, mu, x, s = spec.horizon, spec.barrier, spec.drift, q.level, q.upto
    L = x - v
    if s == t:
        if L < JACOBI_SWITCH * math.sqrt(t):
            return max_cdf_at_barrier_spectral(t, v, x, mu, cfg)
        if v == 0:
            return max_cdf_at_barrier_v0(t, x, mu, cfg)
        return max_cdf_at_barrier_general(t, v, x, mu, cfg)
    log_norm = _log_half_slope(t, mu)

    def integrand(y):
        return barrier_band_kernel(s, y - v, L, mu, cfg) * np.exp(log_survival(t - s, y, v, mu) - log_norm)

    scale = 0.5 * min(math.sqrt(s), math.sqrt(t - s), L)
    val = integrate_interval(integrand, v, x, cfg, scale=scale)
    return float(min(max(val, 0.0), 1.0))


def max_cdf_any(q: MaxQuery, cfg=DEFAULT_NUMERICS):
    if q.spec.at_barrier:
        return max_cdf_at_barrier(q, cfg)
    return max_cdf(q, cfg)


# ---------------------------------------------------------------------------
# first passage


def fpt_survival(q: FptQuery, cfg=DEFAULT_NUMERICS):
    """P(T_x > s | conditioning) for s <= t; the same evaluation as the maximum law."""
    spec = q.spec
    if q.at > spec.horizon:
        raise DomainError("fpt_survival covers s <= t; use fpt_cdf beyond the horizon")
    if not spec.at_barrier and q.level <= spec.start:
        return 0.0
    return max_cdf_any(MaxQuery(spec, q.level, q.at), cfg)


def _endpoint_weight(spec, x, cfg):
    """y -> density of B(t) in (v, x) with max below x, under the conditioning."""
    t, v, mu = spec.horizon, spec.barrier, spec.drift
    if spec.at_barrier:
        log_norm = _log_half_slope(t, mu)
        return lambda y: barrier_band_kernel(t, y - v, x - v, mu, cfg) * math.exp(-log_norm)
    u = spec.start
    log_norm = log_survival(t, u, v, mu)
    return lambda y: band_kernel(t, u, y, v, x, mu, cfg) * math.exp(-log_norm)


def free_fpt_density(tau, h, mu=0.0):
    """Density at tau of the first passage of BM with drift mu over a level h > 0 above the start."""
    tau = np.asarray(tau, dtype=float)
    h = np.asarray(h, dtype=float)
    return h / np.sqrt(2 * np.pi * tau ** 3) * np.exp(-0.5 * (h - mu * tau) ** 2 / tau)


def free_fpt_cdf(tau, h, mu=0.0):
    """P(first passage over h > 0 happens by tau); tau = inf allowed."""
    tau = np.asarray(tau, dtype=float)
    h = np.asarray(h, dtype=float)
    if np.all(np.isinf(tau)):
        return np.where(mu >= 0, 1.0, np.exp(2 * mu * h)) * np.ones_like(h)
    st = np.sqrt(tau)
    first = special.ndtr((mu * tau - h) / st)
    second = np.exp(2 * mu * h + special.log_ndtr(-(h + mu * tau) / st))
    return first + second


def fpt_density_post_horizon(q: FptQuery, cfg=DEFAULT_NUMERICS):
    """dP(T_x in ds)/ds for t < s < t': the free passage from a band-weighted position at t."""
    spec = q.spec
    t, v, mu, x, s = spec.horizon, spec.barrier, spec.drift, q.level, q.at
    if not t < s:
        raise DomainError("post-horizon density needs t < s")
    if not spec.at_barrier and x <= spec.start:
        return 0.0
    weight = _endpoint_weight(spec, x, cfg)

    def integrand(y):
        return weight(y) * free_fpt_density(s - t, x - y, mu)

    scale = 0.5 * min(math.sqrt(t), math.sqrt(s - t), x - v)
    return max(integrate_interval(integrand, v, x, cfg, scale=scale), 0.0)


def fpt_cdf(q: FptQuery, cfg=DEFAULT_NUMERICS):
    """P(T_x <= s | conditioning) for any s in (0, t'] (s = inf gives the total passage mass)."""
    spec = q.spec
    t, v, mu, x, s = spec.horizon, spec.barrier, spec.drift, q.level, q.at
    if not spec.at_barrier and x <= spec.start:
        return 1.0
    if s <= t:
        return 1.0 - fpt_survival(q, cfg)
    before = 1.0 - fpt_survival(FptQuery(spec, x, q.extended_horizon, t), cfg)
    weight = _endpoint_weight(spec, x, cfg)

    def integrand(y):
        return weight(y) * free_fpt_cdf(s - t, x - y, mu)

    scale = 0.5 * min(math.sqrt(t), x - v)
    if np.isfinite(s):
        scale = min(scale, 0.5 * math.sqrt(s - t))
    after = integrate_interval(integrand, v, x, cfg, scale=scale)
    return float(min(max(before + after, 0.0), 1.0))


def never_passage_probability(spec: MeanderSpec, x, cfg=DEFAULT_NUMERICS):
    """P(T_x = inf) when the process runs free forever after t."""
    q = FptQuery(spec, x, math.inf, math.inf)
    return 1.0 - fpt_cdf(q, cfg)

