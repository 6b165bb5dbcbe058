"""Absorbed and band transition kernels of drifted Brownian motion.

Everything here is vectorised over numpy arrays and evaluated in log space
where the raw quantities can under- or overflow. The Gaussian integrals that
appear in the laws are done in closed form through the normal CDF; adaptive
quadrature is kept as an engine for the callers and as a cross-check.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special

from .errors import ConvergenceError, DomainError

SQRT2 = math.sqrt(2.0)
SQRT_HALF_PI = math.sqrt(0.5 * math.pi)
LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)

_GL_X, _GL_W = np.polynomial.legendre.leggauss(16)


@dataclass(frozen=True)
class NumericsConfig:
    """Tolerances and budgets for quadrature and series evaluation."""

    quad_abs_tol: float = 1e-12
    quad_rel_tol: float = 1e-9
    quad_max_levels: int = 16
    series_tol: float = 1e-14
    series_max_terms: int = 10_000

    def __post_init__(self):
        if min(self.quad_abs_tol, self.quad_rel_tol, self.series_tol) <= 0:
            raise DomainError("tolerances must be positive")
        if self.quad_max_levels < 1 or self.series_max_terms < 1:
            raise DomainError("iteration budgets must be at least 1")


DEFAULT_NUMERICS = NumericsConfig()


@dataclass(frozen=True)
class KernelParams:
    """Arguments of the absorbed kernel: elapsed time s, start u, end y, barrier v, drift mu."""

    elapsed: float
    start: float
    end: float
    barrier: float = 0.0
    drift: float = 0.0

    def __post_init__(self):
        if not self.elapsed > 0:
            raise DomainError(f"elapsed time must be positive, got {self.elapsed}")
        if not (self.start > self.barrier and self.end > self.barrier):
            raise DomainError("start and end must lie strictly above the barrier")


@dataclass(frozen=True)
class BandParams:
    """Arguments of the two-barrier kernel on the band (lower, upper)."""

    elapsed: float
    start: float
    end: float
    lower: float
    upper: float
    drift: float = 0.0

    def __post_init__(self):
        if not self.elapsed > 0:
            raise DomainError(f"elapsed time must be positive, got {self.elapsed}")
        if not (self.lower < self.start < self.upper and self.lower < self.end < self.upper):
            raise DomainError("start and end must lie strictly inside the band")


def _scalar_or_array(x):
    x = np.asarray(x, dtype=float)
    return float(x) if x.ndim == 0 else x


# ---------------------------------------------------------------------------
# special-function primitives


def log_phi(x):
    """Log of the standard normal density."""
    x = np.asarray(x, dtype=float)
    return -0.5 * x * x - LOG_SQRT_2PI


def mills_ratio(x):
    """R(x) = (1 - Phi(x)) / phi(x), finite for x down to about -37."""
    return SQRT_HALF_PI * special.erfcx(np.asarray(x, dtype=float) / SQRT2)


def log_mills_ratio(x):
    x = np.asarray(x, dtype=float)
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        direct = np.log(mills_ratio(x))
        tail = special.log_ndtr(-x) - log_phi(x)
    return np.where(x > -5.0, direct, tail)


def _rho_cf(x, depth=160):
    # 1 - x R(x) = R(x) / (x + 2/(x + 3/(x + ...))) for large x
    f = np.array(x, dtype=float, copy=True)
    for k in range(depth, 1, -1):
        f = x + k / f
    return mills_ratio(x) / f


def rho(x):
    """rho(x) = 1 - x R(x) = integral of w exp(-x w - w^2/2) over w > 0.

    Positive for every x; computed without the cancellation of the naive
    form for large positive x.
    """
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    big = x > 5.0
    xs = x[~big]
    with np.errstate(over="ignore", invalid="ignore"):
        out[~big] = 1.0 - xs * mills_ratio(xs)
    out[big] = _rho_cf(x[big])
    return out if out.ndim else float(out)


def log_rho(x):
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    neg = x < -5.0
    xn = x[neg]
    lr = np.log(-xn) + log_mills_ratio(xn)
    out[neg] = lr + np.log1p(np.exp(-lr))
    with np.errstate(divide="ignore"):
        out[~neg] = np.log(rho(x[~neg]))
    return out if out.ndim else float(out)


def log_norm_interval_ch(center, half):
    """log(Phi(c + h) - Phi(c - h)) for finite c and h >= 0.

    Taking the interval as centre and half-width keeps narrow intervals exact
    when the endpoints themselves carry rounding error.
    """
    c, h = np.broadcast_arrays(np.asarray(center, dtype=float), np.asarray(half, dtype=float))
    c = np.abs(c)
    out = np.full(c.shape, -np.inf)
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        a = c - h
        b = c + h
        narrow = (2.0 * h * np.maximum(1.0, b) < 1.0) & (h > 0)
        if narrow.any():
            cn, hn = c[narrow], h[narrow]
            nodes = cn[:, None] + hn[:, None] * _GL_X[None, :]
            out[narrow] = special.logsumexp(log_phi(nodes), b=_GL_W[None, :], axis=1) + np.log(hn)
        pos = ~narrow & (a >= 0) & (h > 0)
        if pos.any():
            ap, bp = a[pos], b[pos]
            shrink = np.exp(-2.0 * h[pos] * c[pos])
            diff = mills_ratio(ap) - shrink * mills_ratio(bp)
            out[pos] = log_phi(ap) + np.log(diff)
        mid = ~narrow & (a < 0) & (h > 0)
        if mid.any():
            out[mid] = np.log(special.ndtr(b[mid]) - special.ndtr(a[mid]))
    return out if out.ndim else float(out)


def log_norm_interval(a, b):
    """log(Phi(b) - Phi(a)) for a <= b, accurate in both tails and for narrow intervals."""
    a, b = np.broadcast_arrays(np.asarray(a, dtype=float), np.asarray(b, dtype=float))
    out = np.full(a.shape, -np.inf)
    fin = np.isfinite(a) & np.isfinite(b)
    out[fin] = log_norm_interval_ch(0.5 * (a[fin] + b[fin]), 0.5 * (b[fin] - a[fin]))
    up = np.isfinite(a) & (b == np.inf)
    out[up] = special.log_ndtr(-a[up])
    dn = (a == -np.inf) & np.isfinite(b)
    out[dn] = special.log_ndtr(b[dn])
    out[(a == -np.inf) & (b == np.inf)] = 0.0
    return out if out.ndim else float(out)


def norm_interval(a, b):
    """Phi(b) - Phi(a) for a <= b."""
    return _scalar_or_array(np.exp(log_norm_interval(a, b)))


def signed_logsumexp(logs, signs, axis=None):
    """Return (log|sum|, sign) of sum(signs * exp(logs))."""
    val, sgn = special.logsumexp(logs, b=signs, axis=axis, return_sign=True)
    return val, sgn


# ---------------------------------------------------------------------------
# kernels and survival


def _check_positive(name, x):
    if not np.all(np.asarray(x) > 0):
        raise DomainError(f"{name} must be positive")


def log_absorbed_kernel(s, u, y, v=0.0, mu=0.0):
    """Log density of drifted BM from u to y in time s, killed at v."""
    s, u, y, v, mu = np.broadcast_arrays(*(np.asarray(z, dtype=float) for z in (s, u, y, v, mu)))
    _check_positive("elapsed time", s)
    if not (np.all(u > v) and np.all(y > v)):
        raise DomainError("start and end must lie strictly above the barrier")
    gap = -np.expm1(-2.0 * (y - v) * (u - v) / s)
    out = (-0.5 * (y - u) ** 2 / s + np.log(gap) - 0.5 * mu * mu * s + mu * (y - u)
           - 0.5 * np.log(s) - LOG_SQRT_2PI)
    return _scalar_or_array(out)


def absorbed_kernel(s, u, y, v=0.0, mu=0.0):
    return _scalar_or_array(np.exp(log_absorbed_kernel(s, u, y, v, mu)))


def absorbed_density(p: KernelParams):
    """Absorbed transition density for a validated parameter record."""
    return absorbed_kernel(p.elapsed, p.start, p.end, p.barrier, p.drift)


def _rho_integral(lo, width):
    # integral of rho over [lo, lo + width], lo >= 0, by 16-point Gauss-Legendre
    h = 0.5 * width
    nodes = (lo + h)[:, None] + h[:, None] * _GL_X[None, :]
    return h * (rho(nodes) @ _GL_W)


def log_survival(t, u, v=0.0, mu=0.0):
    """log P(min of drifted BM over [0, t] stays above v | start u)."""
    t, u, v, mu = np.broadcast_arrays(*(np.asarray(z, dtype=float) for z in (t, u, v, mu)))
    _check_positive("time", t)
    if not np.all(u > v):
        raise DomainError("start must lie strictly above the barrier")
    d = u - v
    st = np.sqrt(t)
    c = mu * st
    h = d / st
    A = c + h
    B = c - h
    out = np.empty(A.shape)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        pos = mu >= 0
        if pos.any():
            l1 = log_norm_interval_ch(c[pos], h[pos])
            l2 = np.log(-np.expm1(-2.0 * mu[pos] * d[pos])) + special.log_ndtr(B[pos])
            out[pos] = np.logaddexp(l1, l2)
        hi = ~pos & (A > 0)
        if hi.any():
            grow = -2.0 * mu[hi] * d[hi]
            log_grow = np.where(grow > 30.0, grow + np.log1p(-np.exp(-grow)), np.log(np.expm1(grow)))
            val = np.exp(log_norm_interval_ch(c[hi], h[hi])) - np.exp(log_grow + special.log_ndtr(B[hi]))
            out[hi] = np.log(val)
        lo = ~pos & (A <= 0)
        if lo.any():
            # S = phi(A) [R(-A) - R(-B)] with -B > -A >= 0
            a1, b1, w1 = -A[lo], -B[lo], 2.0 * h[lo]
            diff = np.empty(a1.shape)
            near = w1 < 1.0
            if near.any():
                diff[near] = _rho_integral(a1[near], w1[near])
            far = ~near
            diff[far] = mills_ratio(a1[far]) - mills_ratio(b1[far])
            out[lo] = log_phi(A[lo]) + np.log(diff)
    return _scalar_or_array(np.minimum(out, 0.0))


def survival_probability(t, u, v=0.0, mu=0.0):
    """P(min_{[0,t]} B^mu > v | B^mu(0) = u) in closed form."""
    return _scalar_or_array(np.exp(log_survival(t, u, v, mu)))


def survival_limit(u, v=0.0, mu=0.0):
    """Probability of never being absorbed, t -> infinity."""
    if mu <= 0:
        return 0.0
    return float(-np.expm1(-2.0 * mu * (u - v)))


def log_barrier_survival_slope(t, mu=0.0):
    """log of d/du survival_probability at u = v, i.e. log(2 (phi(z) + z Phi(z)) / sqrt(t))."""
    t = np.asarray(t, dtype=float)
    z = np.asarray(mu, dtype=float) * np.sqrt(t)
    return _scalar_or_array(math.log(2.0) + log_phi(z) + log_rho(-z) - 0.5 * np.log(t))


def log_half_gaussian_exp_integral(a, tau, mu=0.0):
    """log of half_gaussian_exp_integral for a > 0."""
    a = np.asarray(a, dtype=float)
    mu = np.asarray(mu, dtype=float)
    tau = np.asarray(tau, dtype=float)
    return _scalar_or_array(0.5 * mu * mu * tau + mu * a + log_survival(tau, a, 0.0, mu))


def half_gaussian_exp_integral(a, tau, mu=0.0):
    """Integral over w > 0 of (phi_tau(w - a) - phi_tau(w + a)) exp(mu w).

    Odd in a; zero at a = 0.
    """
    a, tau, mu = np.broadcast_arrays(*(np.asarray(z, dtype=float) for z in (a, tau, mu)))
    _check_positive("tau", tau)
    out = np.zeros(a.shape)
    nz = a != 0
    if nz.any():
        mag = np.abs(a[nz])
        out[nz] = np.sign(a[nz]) * np.exp(log_half_gaussian_exp_integral(mag, tau[nz], mu[nz]))
    return _scalar_or_array(out)


def log_rayleigh_exp_normalizer(t, mu=0.0):
    """log of the integral of w exp(-w^2/(2t) + mu w) over w > 0."""
    t = np.asarray(t, dtype=float)
    _check_positive("time", t)
    return _scalar_or_array(np.log(t) + log_rho(-np.asarray(mu, dtype=float) * np.sqrt(t)))


def rayleigh_exp_normalizer(t, mu=0.0):
    """t + mu t sqrt(2 pi t) exp(mu^2 t/2) Phi(mu sqrt t), written as t * rho(-mu sqrt t).

    The exponential factor is carried through the scaled complementary error
    function; the value itself overflows once mu sqrt(t) exceeds about 37, so
    callers in that regime use the log version.
    """
    return _scalar_or_array(np.exp(log_rayleigh_exp_normalizer(t, mu)))


# ---------------------------------------------------------------------------
# series engine


def sum_two_sided(term, cfg=DEFAULT_NUMERICS):
    """Sum term(0) + sum_{k>=1} (term(k) + term(-k)) with the two-small-terms stop rule."""
    total = np.asarray(term(0), dtype=float)
    quiet = 0
    for k in range(1, cfg.series_max_terms + 1):
        tk = term(k) + term(-k)
        total = total + tk
        if np.all(np.abs(tk) < cfg.series_tol * (1.0 + np.abs(total))):
            quiet += 1
            if quiet >= 2:
                return total
        else:
            quiet = 0
    raise ConvergenceError("series did not converge", estimate=total, error=np.max(np.abs(tk)))


def sum_one_sided(term, cfg=DEFAULT_NUMERICS, start=1):
    total = np.zeros_like(np.asarray(term(start), dtype=float))
    quiet = 0
    for n in range(start, start + cfg.series_max_terms):
        tn = term(n)
        total = total + tn
        if np.all(np.abs(tn) < cfg.series_tol * (1.0 + np.abs(total))):
            quiet += 1
            if quiet >= 2:
                return total
        else:
            quiet = 0
    raise ConvergenceError("series did not converge", estimate=total, error=np.max(np.abs(tn)))


def _phi_s(x, s):
    return np.exp(-0.5 * x * x / s) / np.sqrt(2.0 * np.pi * s)


def band_kernel_driftless(s, a, b, width, cfg=DEFAULT_NUMERICS):
    """Driftless density from a to b in time s inside (0, width), killed at both ends.

    Uses the image series when width^2 >= s and the sine expansion otherwise.
    """
    s, a, b, width = np.broadcast_arrays(*(np.asarray(z, dtype=float) for z in (s, a, b, width)))
    out = np.empty(a.shape)
    wide = width * width >= s
    if wide.any():
        sw, aw, bw, Lw = s[wide], a[wide], b[wide], width[wide]

        def image(k):
            return _phi_s(bw - aw - 2 * k * Lw, sw) - _phi_s(bw + aw - 2 * k * Lw, sw)

        out[wide] = sum_two_sided(image, cfg)
    if (~wide).any():
        sn, an, bn, Ln = s[~wide], a[~wide], b[~wide], width[~wide]

        def mode(n):
            w = n * np.pi / Ln
            return 2.0 / Ln * np.sin(w * an) * np.sin(w * bn) * np.exp(-0.5 * w * w * sn)

        out[~wide] = sum_one_sided(mode, cfg)
    return out


def band_kernel(s, u, y, v, x, mu=0.0, cfg=DEFAULT_NUMERICS):
    """Density of drifted BM from u to y in time s without leaving (v, x).

    The drift enters through the Girsanov factor exp(mu (y - u) - mu^2 s / 2),
    common to every image term.
    """
    s, u, y, v, x, mu = np.broadcast_arrays(*(np.asarray(z, dtype=float) for z in (s, u, y, v, x, mu)))
    _check_positive("elapsed time", s)
    if not (np.all(v < u) and np.all(u < x) and np.all(v < y) and np.all(y < x)):
        raise DomainError("start and end must lie strictly inside the band")
    core = band_kernel_driftless(s, u - v, y - v, x - v, cfg)
    return _scalar_or_array(np.maximum(core, 0.0) * np.exp(mu * (y - u) - 0.5 * mu * mu * s))


def band_density(p: BandParams, cfg=DEFAULT_NUMERICS):
    return band_kernel(p.elapsed, p.start, p.end, p.lower, p.upper, p.drift, cfg)


# ---------------------------------------------------------------------------
# quadrature engines


def integrate_semi_infinite(f, lower, cfg=DEFAULT_NUMERICS, scale=1.0):
    """Integral of f over [lower, inf) via w = lower + scale z/(1-z) and adaptive quadrature."""
    if not scale > 0:
        raise DomainError("scale must be positive")

    def g(z):
        w = lower + scale * z / (1.0 - z)
        return float(np.asarray(f(w)).reshape(-1)[0]) * scale / (1.0 - z) ** 2

    val, err, info, *_ = integrate.quad(g, 0.0, 1.0, epsabs=cfg.quad_abs_tol, epsrel=cfg.quad_rel_tol,
                                        limit=50 * cfg.quad_max_levels, full_output=1)
    target = max(cfg.quad_abs_tol, cfg.quad_rel_tol * abs(val))
    if not np.isfinite(val) or err > 10 * target:
        raise ConvergenceError(f"quadrature error estimate {err:.3g} above target {target:.3g}",
                               estimate=val, error=err)
    return val


def _gl_composite(f, a, b, n):
    edges = np.linspace(a, b, n + 1)
    h = 0.5 * np.diff(edges)
    nodes = (0.5 * (edges[:-1] + edges[1:]))[:, None] + h[:, None] * _GL_X[None, :]
    vals = np.asarray(f(nodes.ravel()), dtype=float).reshape(nodes.shape)
    return float(np.sum(h * (vals @ _GL_W)))


def integrate_interval(f, a, b, cfg=DEFAULT_NUMERICS, scale=None):
    """Integral of a vectorised f over [a, b] by composite 16-point Gauss-Legendre.

    Panels double until two successive estimates agree; ``scale`` caps the
    initial panel width so that narrow features are seen from the start.
    """
    if b <= a:
        return 0.0
    n = 4 if scale is None else max(4, int(math.ceil((b - a) / scale)))
    n = min(n, 1 << 14)
    prev = _gl_composite(f, a, b, n)
    for _ in range(cfg.quad_max_levels):
        n *= 2
        cur = _gl_composite(f, a, b, n)
        if abs(cur - prev) <= max(cfg.quad_abs_tol, cfg.quad_rel_tol * abs(cur)):
            return cur
        prev = cur
    raise ConvergenceError("composite quadrature did not converge", estimate=cur, error=abs(cur - prev))
