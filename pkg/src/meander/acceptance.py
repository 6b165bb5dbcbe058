"""The ten acceptance gates, each returning a CriterionResult.

Every gate uses fixed seeds, so results are deterministic. A gate passes
only when all of its checks pass; ``diagnostics`` carries extra numbers
that explain a failure but never change the verdict.
"""

import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import PchipInterpolator

from . import excursion_laws as ex
from . import extremes_fpt as fx
from . import gauss_kernels as gk
from . import meander_laws as ml
from . import path_sampler as ps
from . import representation as rp
from . import verify_stats as vs

MU_GRID = (-2.0, -0.5, 0.0, 0.5, 2.0)
T_GRID = (0.5, 1.0, 4.0)
V_GRID = (0.0, 1.0)

# Monte Carlo setting shared by the sampler gates
MC_START, MC_BARRIER, MC_DRIFT, MC_HORIZON = 0.5, 0.0, 0.5, 1.0
MC_PATHS, MC_STEPS = 100_000, 1024


@dataclass
class Check:
    label: str
    value: float
    threshold: float
    passed: bool


@dataclass
class CriterionResult:
    number: int
    title: str
    checks: list = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)
    seconds: float = 0.0

    @property
    def passed(self):
        return bool(self.checks) and all(c.passed for c in self.checks)

    def add(self, label, value, threshold, below=True):
        value = float(value)
        ok = bool(np.isfinite(value) and (value < threshold if below else value >= threshold))
        self.checks.append(Check(label, value, float(threshold), ok))
        return ok

    def add_gof(self, rep: vs.GofReport):
        self.add(rep.test_name, rep.statistic, rep.critical_value)

    def to_dict(self):
        return {"criterion": self.number, "title": self.title, "passed": self.passed,
                "seconds": round(self.seconds, 3),
                "checks": [c.__dict__ for c in self.checks], "diagnostics": self.diagnostics}

    def line(self):
        worst = [c.label for c in self.checks if not c.passed]
        tail = f" (failed: {', '.join(worst[:4])}{'...' if len(worst) > 4 else ''})" if worst else ""
        return f"criterion {self.number:2d} {'PASS' if self.passed else 'FAIL'}  {self.title}{tail}"


def _timed(fn):
    def run(seed=0, n_paths=MC_PATHS, alpha=vs.ALPHA):
        t0 = time.perf_counter()
        res = fn(seed=seed, n_paths=n_paths, alpha=alpha)
        res.seconds = time.perf_counter() - t0
        return res

    run.__name__ = fn.__name__
    run.__doc__ = fn.__doc__
    return run


def _last_zero_mass(law):
    # a = t sin^2(theta) removes both inverse square-root endpoint singularities
    t = law.horizon

    def f(theta):
        a = t * np.sin(theta) ** 2
        a = np.clip(a, 1e-300, t * (1 - 1e-16))
        return rp.last_zero_density(law, a) * 2 * t * np.sin(theta) * np.cos(theta)

    return gk.integrate_interval(f, 0.0, 0.5 * math.pi)


@_timed
def criterion_1(seed=0, n_paths=MC_PATHS, alpha=vs.ALPHA):
    """Every density integrates to 1 within 1e-6 over the parameter grid."""
    res = CriterionResult(1, "normalization of every density")
    worst = {}
    for mu in MU_GRID:
        for t in T_GRID:
            st = math.sqrt(t)
            for v in V_GRID:
                above = ml.MeanderSpec(mu, v, v + 0.5 * st, t)
                barrier = ml.MeanderSpec(mu, v, None, t)
                exc = ex.ExcursionSpec(mu, v, v + 0.5 * st, v + st, t)
                cases = {
                    "meander marginal": lambda y: ml.marginal_density(above, 0.5 * t, y),
                    "meander endpoint": lambda y: ml.endpoint_density(above, y),
                    "barrier marginal": lambda y: ml.marginal_density_at_barrier(barrier, 0.3 * t, y),
                    "barrier endpoint": lambda y: ml.endpoint_density_at_barrier(barrier, y),
                    "excursion marginal": lambda y: ex.excursion_marginal_density(exc, 0.4 * t, y),
                    "excursion both-limits": lambda y: ex.excursion_limit_marginal_density(t, 0.3 * t, y - v),
                    "excursion start-limit": lambda y: ex.excursion_limit_marginal_density(
                        t, 0.6 * t, y - v, "start-limit", st),
                }
                for name, dens in cases.items():
                    err = vs.normalization_audit(dens, v, scale=st)
                    worst[name] = max(worst.get(name, 0.0), err)
            worst["last zero"] = max(worst.get("last zero", 0.0), abs(_last_zero_mass(rp.LastZeroLaw(t, mu)) - 1))
    for name, err in worst.items():
        res.add(f"{name} |mass - 1|", err, 1e-6)
    return res


@_timed
def criterion_2(seed=0, n_paths=MC_PATHS, alpha=vs.ALPHA):
    """Driftless endpoint is the truncated Rayleigh law; driftless max law is the theta series."""
    res = CriterionResult(2, "driftless reductions")
    y = np.linspace(1e-3, 6.0, 600)
    err = 0.0
    for t in T_GRID:
        for v in V_GRID:
            got = ml.endpoint_density_at_barrier(ml.MeanderSpec(0.0, v, None, t), v + y * math.sqrt(t))
            a = y * math.sqrt(t)
            err = max(err, float(np.max(np.abs(got - a / t * np.exp(-0.5 * a * a / t)))))
    res.add("endpoint vs Rayleigh, max abs error", err, 1e-12)
    r = np.arange(-4000, 4001)
    err = 0.0
    for t in T_GRID:
        for x in np.linspace(0.05, 5.0, 60) * math.sqrt(t):
            theta = float(np.sum((-1.0) ** np.abs(r) * np.exp(-0.5 * x * x * r * r / t)))
            got = fx.max_cdf_at_barrier(fx.MaxQuery(ml.MeanderSpec(0.0, 0.0, None, t), x))
            err = max(err, abs(got - theta))
    res.add("max CDF vs alternating theta series", err, 1e-10)
    return res


def _excursion_paths(seed, stream, n_paths):
    spec = ex.ExcursionSpec(0.0, MC_BARRIER, MC_START, MC_START, MC_HORIZON)
    cfg = ps.SimConfig(n_steps=MC_STEPS, horizon=MC_HORIZON, seed=seed, stream_id=stream)
    batch = ps.sample_excursion_paths(spec, cfg, n_paths, record=[MC_STEPS // 2])
    return np.sort(batch.values[:, 0])


@_timed
def criterion_3(seed=0, n_paths=MC_PATHS, alpha=vs.ALPHA):
    """Excursion laws do not depend on the drift."""
    res = CriterionResult(3, "drift invariance of the excursion")
    rng = np.random.default_rng(seed + 3)
    worst = 0.0
    for mu in (-3.0, 2.0):
        for _ in range(10):
            v = rng.uniform(-1, 1)
            t = rng.uniform(0.3, 3)
            spec = ex.ExcursionSpec(mu, v, v + rng.uniform(0.05, 2), v + rng.uniform(0.05, 2), t)
            s = rng.uniform(0.05, 0.95) * t
            y = v + np.linspace(0.01, 3.0, 50) * math.sqrt(t)
            a = ex.excursion_marginal_density(spec, s, y)
            b = ex.excursion_marginal_density_tilted(spec, s, y)
            worst = max(worst, float(np.max(np.abs(a - b) / np.maximum(np.abs(a), 1e-300))))
            times = np.sort(rng.uniform(0, t, 3))
            grid = ml.TimeValueGrid(times, v + rng.uniform(0.05, 2, 3))
            la = ex.log_excursion_joint_density(spec, grid)
            lb = ex.log_excursion_joint_density(spec, grid, tilted=True)
            worst = max(worst, abs(math.expm1(lb - la)))
    res.add("tilted vs reduced, max relative difference", worst, 1e-12)
    x = _excursion_paths(seed, 3, n_paths)
    labelled = ex.ExcursionSpec(2.0, MC_BARRIER, MC_START, MC_START, MC_HORIZON)
    cdf = vs.cdf_from_density(lambda y: ex.excursion_marginal_density_tilted(labelled, 0.5 * MC_HORIZON, y),
                              MC_BARRIER + 1e-12, MC_BARRIER + 8 * math.sqrt(MC_HORIZON), 20001)
    res.add_gof(vs.ks_one_sample(x, cdf, "KS mu=0 excursion paths vs mu=2 density", alpha=alpha))
    return res


@_timed
def criterion_4(seed=0, n_paths=MC_PATHS, alpha=vs.ALPHA):
    """Chapman-Kolmogorov for the absorbed kernel and marginalization of joint laws."""
    res = CriterionResult(4, "semigroup and marginalization")
    rng = np.random.default_rng(seed + 4)
    ck = marg = 0.0
    for _ in range(20):
        mu = rng.uniform(-2, 2)
        v = rng.uniform(-1, 1)
        s1, s2 = rng.uniform(0.1, 1.5, 2)
        u, y = v + rng.uniform(0.05, 2, 2)
        scale = 0.5 * math.sqrt(min(s1, s2))
        lhs = gk.integrate_semi_infinite(
            lambda z: gk.absorbed_kernel(s1, u, z, v, mu) * gk.absorbed_kernel(s2, z, y, v, mu), v, scale=scale)
        ck = max(ck, abs(lhs - gk.absorbed_kernel(s1 + s2, u, y, v, mu)))
        t = s1 + s2 + rng.uniform(0.1, 1.0)
        for spec in (ml.MeanderSpec(mu, v, u, t), ml.MeanderSpec(mu, v, None, t)):
            y1 = v + rng.uniform(0.05, 2)

            def joint(z):
                z = np.atleast_1d(z)
                return np.array([ml.joint_density(spec, ml.TimeValueGrid([s1, s1 + s2], [y1, zz])) for zz in z])

            lhs = gk.integrate_semi_infinite(joint, v, scale=0.5 * math.sqrt(s2))
            marg = max(marg, abs(lhs - float(ml.density(spec, s1, y1))))
    res.add("Chapman-Kolmogorov max abs error", ck, 1e-6)
    res.add("joint-law marginalization max abs error", marg, 1e-6)
    return res


def _fpt_cdf_callable(spec, x, t_prime):
    t = spec.horizon
    grid = np.concatenate((np.geomspace(1e-4, 0.05, 40) * t, np.linspace(0.05, 1.0, 120)[1:] * t))
    vals = np.array([1.0 - fx.fpt_survival(fx.FptQuery(spec, x, t_prime, s)) for s in grid])
    vals = np.maximum.accumulate(vals)
    spline = PchipInterpolator(np.concatenate(([0.0], grid)), np.concatenate(([0.0], vals)))
    return lambda s: np.clip(spline(np.clip(s, 0.0, t)), 0.0, 1.0)


@_timed
def criterion_5(seed=0, n_paths=MC_PATHS, alpha=vs.ALPHA):
    """Conditioned paths reproduce the analytic laws."""
    res = CriterionResult(5, "Monte Carlo agreement of the samplers")
    t, v, mu, u = MC_HORIZON, MC_BARRIER, MC_DRIFT, MC_START
    spec = ml.MeanderSpec(mu, v, u, t)
    cfg = ps.SimConfig(n_steps=MC_STEPS, horizon=t, seed=seed, stream_id=51)
    batch = ps.sample_meander_paths(spec, cfg, n_paths, record=[MC_STEPS // 2, MC_STEPS])
    hi = v + u + abs(mu) * t + 9 * math.sqrt(t)
    for j, s, name in ((1, t, "meander endpoint"), (0, 0.5 * t, "meander marginal s=t/2")):
        cdf = vs.cdf_from_density(lambda y: ml.marginal_density(spec, s, y), v + 1e-12, hi, 20001)
        res.add_gof(vs.ks_one_sample(np.sort(batch.values[:, j]), cdf, f"KS {name}", alpha=alpha))
    exc = ex.ExcursionSpec(0.0, v, u, u, t)
    cdf = vs.cdf_from_density(lambda y: ex.excursion_marginal_density(exc, 0.5 * t, y), v + 1e-12, v + 8 * math.sqrt(t),
                              20001)
    paths = _excursion_paths(seed, 52, n_paths)
    res.add_gof(vs.ks_one_sample(paths, cdf, "KS excursion marginal s=t/2", alpha=alpha))
    x, t_prime = 1.2, 2.0
    cfg_f = ps.SimConfig(n_steps=MC_STEPS, horizon=t, seed=seed, stream_id=53)
    times, meta = ps.sample_two_phase_fpt(spec, x, t_prime, cfg_f, n_paths)
    rep = vs.ks_one_sample(np.sort(times), _fpt_cdf_callable(spec, x, t_prime), "KS first passage on [0, t]",
                           alpha=alpha, upper=t)
    res.add_gof(rep)
    p = gk.survival_probability(t, u, v, mu)
    rate = batch.acceptance_rate
    sigma = math.sqrt(p * (1 - p) / batch.metadata["proposals"])
    res.add("acceptance rate |z| vs survival probability", abs(rate - p) / sigma, 4.0)
    res.diagnostics.update({"acceptance_rate": rate, "survival_probability": p})
    return res


@_timed
def criterion_6(seed=0, n_paths=MC_PATHS, alpha=vs.ALPHA):
    """Laws started at v + eps approach the barrier-start laws as eps decreases."""
    res = CriterionResult(6, "barrier limit as the start approaches the barrier")
    eps_grid = (1e-1, 1e-2, 1e-3)
    for mu in (-1.0, 0.0, 1.0):
        for t in (0.5, 1.0, 4.0):
            st = math.sqrt(t)
            barrier = ml.MeanderSpec(mu, 0.0, None, t)
            y = np.linspace(0.01, 5.0, 200) * st
            dens = vs.sweep_regime_agreement(
                lambda e, yy: ml.endpoint_density(ml.MeanderSpec(mu, 0.0, e * st, t), yy),
                lambda e, yy: ml.endpoint_density_at_barrier(barrier, yy), eps_grid, y)
            xs = np.linspace(0.2, 4.0, 20) * st
            cdfs = vs.sweep_regime_agreement(
                lambda e, xx: [fx.max_cdf(fx.MaxQuery(ml.MeanderSpec(mu, 0.0, e * st, t), x)) for x in xx],
                lambda e, xx: [fx.max_cdf_at_barrier(fx.MaxQuery(barrier, x)) for x in xx], eps_grid, xs)
            for name, rep in (("endpoint density", dens), ("max CDF", cdfs)):
                ok = vs.is_monotone_decreasing(rep)
                res.checks.append(Check(f"{name} mu={mu} t={t} monotone", rep[-1].sup_difference, 0.0, ok))
                res.diagnostics[f"{name} mu={mu} t={t}"] = [r.sup_difference for r in rep]
    return res


@_timed
def criterion_7(seed=0, n_paths=MC_PATHS, alpha=vs.ALPHA):
    """Post-last-zero rescaled path against the symmetric +/- drift meander mixture."""
    res = CriterionResult(7, "representation after the last zero")
    cfg = ps.SimConfig(n_steps=64, horizon=1.0, seed=seed, stream_id=71)
    s_grid = (0.25, 0.5, 0.75)
    for mu in (0.0, 1.0):
        law = rp.LastZeroLaw(1.0, mu)
        _, lhs = ps.sample_post_zero(mu, 1.0, s_grid, cfg, n_paths)
        for j, s in enumerate(s_grid):
            a = np.sort(lhs[:, j])
            rng = ps.stream_rng(seed, 72, int(100 * s + 1000 * mu))
            b = np.sort(rp.sample_rescaled_mixture(law, s, n_paths, rng, "half"))
            res.add_gof(vs.ks_two_sample(a, b, f"KS2 mu={mu} s={s} vs symmetric mixture", alpha=alpha))
            rng = ps.stream_rng(seed, 73, int(100 * s + 1000 * mu))
            c = np.sort(rp.sample_rescaled_mixture(law, s, n_paths, rng, "exact"))
            d = vs.ks_two_sample(a, c, "exact-weight mixture", alpha=alpha)
            res.diagnostics[f"mu={mu} s={s} exact-weight KS2"] = [d.statistic, d.critical_value, d.passed]
            if mu == 0.0:
                # classical identity: a driftless meander started at the barrier
                spec = ml.MeanderSpec(0.0, 0.0, None, 1.0)
                cdf = vs.cdf_from_density(lambda y: ml.marginal_density_at_barrier(spec, s, y), 1e-12, 9.0, 20001)
                res.add_gof(vs.ks_one_sample(a, cdf, f"KS mu=0 s={s} vs driftless barrier meander", alpha=alpha))
    return res


@_timed
def criterion_8(seed=0, n_paths=MC_PATHS, alpha=vs.ALPHA):
    """Last-zero law: arcsine at zero drift, simulated last zeros at drift 1."""
    res = CriterionResult(8, "last-zero law")
    err = 0.0
    for t in T_GRID:
        a = np.linspace(1e-4, 1 - 1e-4, 999) * t
        got = rp.last_zero_density(rp.LastZeroLaw(t, 0.0), a)
        ref = 1.0 / (math.pi * np.sqrt(a * (t - a)))
        err = max(err, float(np.max(np.abs(got - ref) / ref)))
    res.add("mu=0 density vs arcsine, max relative error", err, 1e-12)
    cfg = ps.SimConfig(n_steps=64, horizon=1.0, seed=seed, stream_id=81)
    law = rp.LastZeroLaw(1.0, 1.0)
    t0, _ = ps.sample_post_zero(1.0, 1.0, [0.5], cfg, n_paths)
    res.add_gof(vs.ks_one_sample(np.sort(t0), lambda a: rp.last_zero_cdf(law, a), "KS mu=1 simulated last zeros",
                                 alpha=alpha))
    return res


@_timed
def criterion_9(seed=0, n_paths=MC_PATHS, alpha=vs.ALPHA):
    """Max CDF at x = 0.01 sqrt(t) is tiny, finite and uses the sine expansion."""
    res = CriterionResult(9, "small-level stability of the max law")
    worst = 0.0
    bad = 0
    for mu in MU_GRID:
        for t in T_GRID:
            for v in V_GRID:
                x = v + 0.01 * math.sqrt(t)
                val = fx.max_cdf_at_barrier(fx.MaxQuery(ml.MeanderSpec(mu, v, None, t), x))
                bad += int(not (np.isfinite(val) and 0.0 <= val <= 1e-6))
                worst = max(worst, val if np.isfinite(val) else np.inf)
    res.add("values outside [0, 1e-6] or NaN", bad, 1)
    res.diagnostics["largest value"] = worst
    res.add("spectral route selected (L / sqrt(t) below switch)", 0.01, fx.JACOBI_SWITCH)
    return res


def _edge_rate(t, x, mu):
    """kappa / 2: half the rate at which P(max over [0, s] < x) exceeds its value at s = t, as s -> t."""
    L = x
    k = np.arange(-40, 41)
    ak = (1 - 2 * k) * L
    phi = np.exp(-0.5 * ak * ak / t) / math.sqrt(2 * math.pi * t)
    val = 0.5 * math.exp(mu * L - 0.5 * mu * mu * t) * np.sum((ak * ak / t - 1) / t * phi)
    return val / math.exp(fx._log_half_slope(t, mu))


@_timed
def criterion_10(seed=0, n_paths=MC_PATHS, alpha=vs.ALPHA):
    """Max law before the horizon tends to the law at the horizon; v = 0 form equals the general form."""
    res = CriterionResult(10, "regime agreement of the max laws")
    t = 1.0
    s = t * (1 - 1e-5)
    gap = 0.0
    ratios = {}
    for mu in (-1.0, 0.0, 1.0):
        spec = ml.MeanderSpec(mu, 0.0, None, t)
        for x in (0.5, 1.0, 2.0):
            before = fx.max_cdf_at_barrier(fx.MaxQuery(spec, x, s))
            at = fx.max_cdf_at_barrier(fx.MaxQuery(spec, x))
            g = abs(before - at)
            gap = max(gap, g)
            ratios[f"mu={mu} x={x}"] = {"gap": g, "gap/(t-s)": g / (t - s), "kappa/2": _edge_rate(t, x, mu)}
    res.add("gap between s = t(1 - 1e-5) and s = t", gap, 1e-6)
    res.diagnostics["gap vs linear rate"] = ratios
    diff = 0.0
    for mu in MU_GRID:
        for tt in T_GRID:
            for x in np.linspace(0.1, 4.0, 25) * math.sqrt(tt):
                diff = max(diff, abs(fx.max_cdf_at_barrier_v0(tt, x, mu) - fx.max_cdf_at_barrier_general(tt, 0.0, x, mu)))
    res.add("v = 0 form vs general form", diff, 1e-8)
    return res


CRITERIA = {i: globals()[f"criterion_{i}"] for i in range(1, 11)}
GROUPS = {"normalization": (1,), "analytic": (1, 2, 4, 6, 8, 9, 10), "monte-carlo": (3, 5, 7, 8), "all": tuple(CRITERIA)}


def run_criteria(numbers=None, seed=0, n_paths=MC_PATHS, alpha=vs.ALPHA, echo=None):
    out = []
    for i in numbers or CRITERIA:
        r = CRITERIA[i](seed=seed, n_paths=n_paths, alpha=alpha)
        if echo:
            echo(r.line())
        out.append(r)
    return out
