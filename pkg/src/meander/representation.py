"""Last zero of drifted BM and the post-last-zero meander representation.

After its last zero T0 before t, |B^mu| rescaled to unit time is a meander
started at the barrier with drift +mu sqrt(t - T0) on positive final
excursions and -mu sqrt(t - T0) on negative ones. The symmetric mixture
(weights 1/2) and the exact mixture, whose weights come from the ratio of
the two barrier survival slopes, are both provided.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .errors import DomainError
from .gauss_kernels import _scalar_or_array, log_phi, log_rho, mills_ratio, rho
from .meander_laws import log_barrier_marginal

_GL64_X, _GL64_W = np.polynomial.legendre.leggauss(64)


@dataclass(frozen=True)
class LastZeroLaw:
    """Last zero before ``horizon`` of BM with drift ``drift`` started at 0."""

    horizon: float = 1.0
    drift: float = 0.0

    def __post_init__(self):
        if not self.horizon > 0:
            raise DomainError(f"horizon must be positive, got {self.horizon}")


@dataclass(frozen=True)
class TruncExp:
    """Exponential(rate_param) on (0, cutoff) with the remaining mass as an atom at cutoff."""

    rate_param: float
    cutoff: float

    def __post_init__(self):
        if self.rate_param < 0 or not self.cutoff > 0:
            raise DomainError("rate must be non-negative and cutoff positive")

    @property
    def atom_at_cutoff(self):
        return math.exp(-self.rate_param * self.cutoff)

    @classmethod
    def from_law(cls, law: LastZeroLaw):
        return cls(0.5 * law.drift ** 2, law.horizon)

    def mean(self):
        lam, t = self.rate_param, self.cutoff
        if lam == 0:
            return t
        return -math.expm1(-lam * t) / lam


@dataclass(frozen=True)
class SignMix:
    """Two-point law on {+1, -1}; ``p_plus = 1/2`` is the symmetric mixture."""

    p_plus: float = 0.5

    def __post_init__(self):
        if not 0 <= self.p_plus <= 1:
            raise DomainError("p_plus must be a probability")


def _check_a(law, a):
    a = np.asarray(a, dtype=float)
    if np.any(a <= 0) or np.any(a >= law.horizon):
        raise DomainError("a must lie in (0, horizon)")
    return a


def last_zero_density(law: LastZeroLaw, a):
    """Density of T0 at a: E[1{W >= a} / (pi sqrt(a (W - a)))].

    With w = a + r^2 the integral over the exponential part of W is a
    Gaussian integral and is done in closed form.
    """
    a = _check_a(law, a)
    t, mu = law.horizon, abs(law.drift)
    atom = np.exp(-0.5 * mu * mu * t) / (math.pi * np.sqrt(a * (t - a)))
    if mu == 0:
        return _scalar_or_array(atom)
    body = (mu * math.sqrt(2 * math.pi) * np.exp(-0.5 * mu * mu * a)
            * 0.5 * special.erf(mu * np.sqrt(t - a) / math.sqrt(2)) / (math.pi * np.sqrt(a)))
    return _scalar_or_array(body + atom)


def last_zero_density_quad(law: LastZeroLaw, a):
    """Same density with the w-integral done numerically after w = a + r^2."""
    a = _check_a(law, np.atleast_1d(a))
    t, mu = law.horizon, law.drift
    r_hi = np.sqrt(t - a)
    r = 0.5 * r_hi[:, None] * (1 + _GL64_X[None, :])
    integrand = 0.5 * mu * mu * np.exp(-0.5 * mu * mu * (a[:, None] + r * r)) * 2.0 / (math.pi * np.sqrt(a[:, None]))
    body = 0.5 * r_hi * (integrand @ _GL64_W)
    atom = np.exp(-0.5 * mu * mu * t) / (math.pi * np.sqrt(a * (t - a)))
    return _scalar_or_array(body + atom)


def last_zero_cdf(law: LastZeroLaw, a):
    """P(T0 <= a) = E[(2/pi) arcsin sqrt(min(a, W)/W)]."""
    a = np.atleast_1d(np.asarray(a, dtype=float))
    t, mu = law.horizon, law.drift
    lam = 0.5 * mu * mu
    a = np.clip(a, 0.0, t)
    early = -np.expm1(-lam * a)
    r_hi = np.sqrt(t - a)
    r = 0.5 * r_hi[:, None] * (1 + _GL64_X[None, :])
    w = a[:, None] + r * r
    with np.errstate(invalid="ignore", divide="ignore"):
        arc = np.where(w > 0, np.arcsin(np.sqrt(np.where(w > 0, a[:, None] / w, 0.0))), 0.0)
    middle = 0.5 * r_hi * ((lam * np.exp(-lam * w) * (2 / math.pi) * arc * 2 * r) @ _GL64_W)
    atom = math.exp(-lam * t) * (2 / math.pi) * np.arcsin(np.sqrt(a / t))
    return _scalar_or_array(np.clip(early + middle + atom, 0.0, 1.0))


def sample_truncated_exponential(law: TruncExp, rng, size=None):
    """Inverse-CDF draw; the atom value ``cutoff`` comes out with probability exp(-rate * cutoff)."""
    u = rng.random(size)
    lam, t = law.rate_param, law.cutoff
    if lam == 0:
        return np.full_like(u, t) if size is not None else t
    w = -np.log1p(-u) / lam
    return np.minimum(w, t)


def sample_last_zero(law: LastZeroLaw, rng, size=None):
    """T0 = W sin^2(pi U / 2): arcsine on (0, W) with W truncated exponential."""
    w = sample_truncated_exponential(TruncExp.from_law(law), rng, size)
    return w * np.sin(0.5 * math.pi * rng.random(size)) ** 2


def post_zero_sign_probability(r, mu):
    """P(final excursion is positive | last zero at t - r) = rho(-z) / (rho(-z) + rho(z)), z = mu sqrt(r)."""
    z = np.asarray(mu, dtype=float) * np.sqrt(np.asarray(r, dtype=float))
    up, down = rho(-z), rho(z)
    return _scalar_or_array(up / (up + down))


def _sign_probs(law, t0, sign_weights):
    if sign_weights == "half":
        return np.full(np.shape(t0), 0.5)
    if sign_weights == "exact":
        return post_zero_sign_probability(law.horizon - np.asarray(t0), law.drift)
    raise DomainError(f"unknown sign weighting {sign_weights!r}")


def rescaled_post_zero_density(law: LastZeroLaw, s, y, t0_samples, sign_weights="half"):
    """Monte Carlo average over T0 draws of the +/- drift barrier-meander densities at (s, y).

    ``sign_weights="half"`` is the symmetric mixture, ``"exact"`` weights each
    sign by the probability that the final excursion has that sign.
    """
    if not 0 < s < 1:
        raise DomainError("s must lie in (0, 1)")
    t0 = np.asarray(t0_samples, dtype=float).ravel()
    if t0.size == 0:
        raise DomainError("need at least one last-zero sample")
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if np.any(y <= 0):
        raise DomainError("y must be positive")
    m = law.drift * np.sqrt(law.horizon - t0)
    p = _sign_probs(law, t0, sign_weights)
    total = np.zeros(y.shape)
    for lo in range(0, t0.size, 2048):
        mm = m[lo:lo + 2048, None]
        pp = p[lo:lo + 2048, None]
        up = np.exp(log_barrier_marginal(1.0, s, y[None, :], mm))
        down = np.exp(log_barrier_marginal(1.0, s, y[None, :], -mm))
        total += np.sum(pp * up + (1 - pp) * down, axis=0)
    return _scalar_or_array(total / t0.size)


def barrier_endpoint_sf(w, m, horizon=1.0):
    """P(endpoint > w) for the barrier-start meander with drift m; density prop. to w exp(-w^2/2T + m w)."""
    st = math.sqrt(horizon)
    z = np.asarray(m, dtype=float) * st
    q = np.asarray(w, dtype=float) / st - z
    z, q = np.broadcast_arrays(z, q)
    with np.errstate(divide="ignore", invalid="ignore"):
        # phi(q) + z (1 - Phi(q)); both terms positive when z >= 0, and q > |z| otherwise
        log_num = np.where(
            z >= 0,
            np.logaddexp(log_phi(q), np.log(np.abs(z)) + special.log_ndtr(-q)),
            log_phi(q) + np.log1p(-np.abs(z) * mills_ratio(np.maximum(q, 0.0))),
        )
    log_den = log_phi(z) + log_rho(-z)
    return np.exp(log_num - log_den)


def sample_barrier_endpoint(m, rng, horizon=1.0, iters=64):
    """Inverse-SF draw of the endpoint by vectorised bisection."""
    m = np.asarray(m, dtype=float)
    u = rng.random(m.shape)
    st = math.sqrt(horizon)
    lo = np.zeros(m.shape)
    hi = np.maximum(m * horizon, 0.0) + 40.0 * st
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        above = barrier_endpoint_sf(mid, m, horizon) > u
        lo = np.where(above, mid, lo)
        hi = np.where(above, hi, mid)
    return 0.5 * (lo + hi)


def sample_barrier_meander_marginal(m, s, rng, horizon=1.0):
    """Value at time s of the barrier-start meander with drift m.

    Given its endpoint w the path is a 3-d Bessel bridge from 0 to w, i.e.
    the norm of a 3-d Brownian bridge, whatever the drift.
    """
    m = np.asarray(m, dtype=float)
    w = sample_barrier_endpoint(m, rng, horizon)
    frac = s / horizon
    z = rng.standard_normal(m.shape + (3,)) * math.sqrt(s * (1 - frac))
    z[..., 0] += frac * w
    return np.sqrt(np.sum(z * z, axis=-1))


def sample_rescaled_mixture(law: LastZeroLaw, s, n, rng, sign_weights="half"):
    """n draws from the mixture of +/- mu sqrt(t - T0) barrier meanders at time s of [0, 1]."""
    if not 0 < s < 1:
        raise DomainError("s must lie in (0, 1)")
    t0 = sample_last_zero(law, rng, n)
    p = _sign_probs(law, t0, sign_weights)
    sign = np.where(rng.random(n) < p, 1.0, -1.0)
    m = sign * law.drift * np.sqrt(law.horizon - t0)
    return sample_barrier_meander_marginal(m, s, rng)
