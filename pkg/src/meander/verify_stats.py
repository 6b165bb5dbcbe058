"""Goodness-of-fit and numerical audit helpers with machine-readable reports."""

import csv
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import interpolate, stats

from .errors import DomainError
from .gauss_kernels import DEFAULT_NUMERICS, integrate_interval, integrate_semi_infinite

ALPHA = 0.01


def ks_coefficient(alpha=ALPHA):
    """Asymptotic Kolmogorov quantile c(alpha) = sqrt(-ln(alpha/2)/2); 1.6276 at alpha = 0.01."""
    return math.sqrt(-0.5 * math.log(0.5 * alpha))


@dataclass
class GofReport:
    test_name: str
    statistic: float
    critical_value: float
    n: int
    passed: bool
    metadata: dict = field(default_factory=dict)

    def to_dict(self):
        out = asdict(self)
        out["statistic"] = float(self.statistic)
        out["critical_value"] = float(self.critical_value)
        out["passed"] = bool(self.passed)
        return out


def _check_sorted(x, name):
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise DomainError(f"{name} must be one-dimensional")
    if np.any(x[1:] < x[:-1]):
        raise DomainError(f"{name} must be sorted")
    if x.size < 100:
        raise DomainError(f"{name} needs at least 100 samples, got {x.size}")
    return x


def ks_one_sample(samples, cdf, name="ks_one_sample", alpha=ALPHA, upper=None, metadata=None):
    """Kolmogorov distance between the sorted samples and cdf.

    Samples equal to +inf (or above ``upper``) are censored: they enter the
    empirical CDF only through n, and the supremum runs over finite points.
    """
    x = _check_sorted(samples, "samples")
    n = x.size
    finite = x[np.isfinite(x)] if upper is None else x[x <= upper]
    k = finite.size
    F = np.clip(np.asarray(cdf(finite), dtype=float), 0.0, 1.0)
    if np.any(np.diff(F) < -1e-12):
        raise DomainError("cdf is not monotone on the sample range")
    i = np.arange(1, k + 1)
    d = 0.0
    if k:
        d = max(np.max(i / n - F), np.max(F - (i - 1) / n))
    if k < n:
        # mass beyond the last finite point
        top = upper if upper is not None else np.inf
        f_top = float(np.clip(cdf(np.array([top]))[0], 0.0, 1.0)) if np.isfinite(top) else None
        if f_top is not None:
            d = max(d, abs(k / n - f_top))
    crit = ks_coefficient(alpha) / math.sqrt(n)
    return GofReport(name, float(d), crit, n, bool(d < crit), dict(metadata or {}, alpha=alpha))


def ks_two_sample(a, b, name="ks_two_sample", alpha=ALPHA, metadata=None):
    a = _check_sorted(a, "a")
    b = _check_sorted(b, "b")
    n, m = a.size, b.size
    pts = np.concatenate([a, b])
    fa = np.searchsorted(a, pts, side="right") / n
    fb = np.searchsorted(b, pts, side="right") / m
    d = float(np.max(np.abs(fa - fb)))
    crit = ks_coefficient(alpha) * math.sqrt((n + m) / (n * m))
    return GofReport(name, d, crit, n, bool(d < crit), dict(metadata or {}, alpha=alpha, n_b=m))


def cdf_from_density(density, lower, upper, n_grid=4001):
    """Monotone CDF callable from a density on [lower, upper] (cumulative trapezoid on a fine grid, PCHIP)."""
    y = np.linspace(lower, upper, n_grid)
    f = np.asarray(density(y), dtype=float)
    c = np.concatenate(([0.0], np.cumsum(0.5 * (f[1:] + f[:-1]) * np.diff(y))))
    c /= c[-1]
    spline = interpolate.PchipInterpolator(y, c)

    def cdf(z):
        z = np.asarray(z, dtype=float)
        return np.clip(spline(np.clip(z, lower, upper)), 0.0, 1.0)

    return cdf


def chi2_histogram(samples, density, edges, name="chi2_histogram", alpha=ALPHA, min_expected=5.0):
    """Pearson chi-square of binned samples against the density integrated per bin."""
    x = np.asarray(samples, dtype=float)
    edges = np.asarray(edges, dtype=float)
    obs, _ = np.histogram(x, edges)
    mids = 0.5 * (edges[1:] + edges[:-1])
    # per-bin mass by 5-point Gauss-Legendre
    gx, gw = np.polynomial.legendre.leggauss(5)
    half = 0.5 * np.diff(edges)
    pts = mids[:, None] + half[:, None] * gx[None, :]
    mass = np.sum(np.asarray(density(pts.ravel())).reshape(pts.shape) * gw, axis=1) * half
    exp = mass * x.size
    keep = exp >= min_expected
    stat = float(np.sum((obs[keep] - exp[keep]) ** 2 / exp[keep]))
    dof = max(int(keep.sum()) - 1, 1)
    crit = float(stats.chi2.ppf(1 - alpha, dof))
    return GofReport(name, stat, crit, int(x.size), bool(stat < crit), {"dof": dof, "alpha": alpha})


def normalization_audit(density, domain_lower, cfg=DEFAULT_NUMERICS, scale=1.0, domain_upper=None):
    """|integral of density - 1| over [domain_lower, inf) (or a finite interval)."""
    if domain_upper is not None:
        return abs(integrate_interval(density, domain_lower, domain_upper, cfg) - 1.0)
    return abs(integrate_semi_infinite(density, domain_lower, cfg, scale) - 1.0)


@dataclass
class SweepReport:
    parameter: float
    sup_difference: float
    monotone_so_far: bool


def sweep_regime_agreement(law_a, law_b, sweep, points):
    """sup over ``points`` of |law_a(p, .) - law_b(p, .)| for each p in sweep, with a monotone-decrease flag."""
    pts = np.asarray(points, dtype=float)
    out = []
    prev = np.inf
    ok = True
    for p in sweep:
        d = float(np.max(np.abs(np.asarray(law_a(p, pts)) - np.asarray(law_b(p, pts)))))
        ok = ok and d <= prev
        out.append(SweepReport(float(p), d, ok))
        prev = d
    return out


def is_monotone_decreasing(reports):
    return all(r.monotone_so_far for r in reports)


def write_reports_json(reports, path):
    with open(path, "w") as fh:
        json.dump([r.to_dict() for r in reports], fh, indent=2)


def write_reports_csv(reports, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["test_name", "statistic", "critical_value", "n", "passed"])
        for r in reports:
            w.writerow([r.test_name, repr(float(r.statistic)), repr(float(r.critical_value)), r.n, int(r.passed)])
