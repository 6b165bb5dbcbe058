import json
import math

import numpy as np
import pytest
from scipy import special, stats

from meander import verify_stats as vs
from meander.errors import DomainError
from meander.excursion_laws import excursion_limit_marginal_density
from meander.meander_laws import MeanderSpec, endpoint_density_at_barrier


def test_critical_values_match_table():
    # tabulated asymptotic Kolmogorov quantile at alpha = 0.01
    for n in (100, 10_000):
        rep = vs.ks_one_sample(np.linspace(0.005, 0.995, n), lambda x: x)
        assert rep.critical_value == pytest.approx(1.63 / math.sqrt(n), rel=0.01)
        assert rep.critical_value == pytest.approx(stats.kstwobign.ppf(0.99) / math.sqrt(n), rel=0.01)


def test_one_sample_null_and_power():
    rng = np.random.default_rng(0)
    passes = sum(vs.ks_one_sample(np.sort(rng.standard_normal(2000)), special.ndtr).passed for _ in range(100))
    assert passes >= 95
    shifted = np.sort(rng.standard_normal(10_000) + 0.5)
    assert not vs.ks_one_sample(shifted, special.ndtr).passed
    small = vs.ks_one_sample(np.sort(rng.random(100)), lambda x: x)
    assert small.statistic < 0.163


def test_statistic_matches_scipy():
    x = np.sort(np.random.default_rng(5).standard_normal(500))
    assert vs.ks_one_sample(x, special.ndtr).statistic == pytest.approx(stats.kstest(x, "norm").statistic, rel=1e-12)
    y = np.sort(np.random.default_rng(6).standard_normal(700))
    assert vs.ks_two_sample(x, y).statistic == pytest.approx(stats.ks_2samp(x, y).statistic, rel=1e-12)


def test_two_sample_null_and_power():
    rng = np.random.default_rng(1)
    a, b = np.sort(rng.standard_normal(10_000)), np.sort(rng.standard_normal(8000))
    assert vs.ks_two_sample(a, b).passed
    assert not vs.ks_two_sample(a, np.sort(b + 0.5)).passed
    assert vs.ks_two_sample(np.sort(rng.random(100)), np.sort(rng.random(100))).statistic < 0.3


def test_censored_samples():
    rng = np.random.default_rng(2)
    x = rng.exponential(size=5000)
    x[x > 1.5] = np.inf
    rep = vs.ks_one_sample(np.sort(x), lambda z: 1 - np.exp(-z))
    assert rep.passed
    rep = vs.ks_one_sample(np.sort(rng.exponential(size=5000)), lambda z: 1 - np.exp(-z), upper=1.0)
    assert rep.passed


def test_input_errors():
    with pytest.raises(DomainError):
        vs.ks_one_sample(np.arange(200.0)[::-1], lambda x: x)
    with pytest.raises(DomainError):
        vs.ks_one_sample(np.arange(50.0), lambda x: x)
    with pytest.raises(DomainError):
        vs.ks_two_sample(np.arange(200.0), np.arange(200.0)[::-1])


def test_normalization_audit():
    phi = lambda x: np.exp(-0.5 * x * x) / math.sqrt(2 * math.pi)
    assert vs.normalization_audit(lambda x: 2 * phi(x), 0.0) < 1e-12
    spec = MeanderSpec(1.0, 0.0, None, 1.0)
    assert vs.normalization_audit(lambda y: endpoint_density_at_barrier(spec, y), 0.0) < 1e-6
    assert vs.normalization_audit(lambda y: excursion_limit_marginal_density(1.0, 0.3, y), 0.0) < 1e-6


def test_sweeps():
    f = lambda p, x: np.exp(-p * x)
    same = vs.sweep_regime_agreement(f, f, [1, 2, 3], np.linspace(0, 1, 5))
    assert all(r.sup_difference == 0 for r in same) and vs.is_monotone_decreasing(same)
    g = lambda p, x: np.exp(-x) + p * x
    rep = vs.sweep_regime_agreement(g, lambda p, x: np.exp(-x), [0.1, 0.01, 0.2], np.linspace(0, 1, 5))
    assert [r.monotone_so_far for r in rep] == [True, True, False]


def test_chi2_and_reports(tmp_path):
    rng = np.random.default_rng(4)
    x = rng.standard_normal(20000)
    rep = vs.chi2_histogram(x, lambda z: np.exp(-0.5 * z * z) / math.sqrt(2 * math.pi), np.linspace(-4, 4, 41))
    assert rep.passed
    assert not vs.chi2_histogram(x + 0.1, lambda z: np.exp(-0.5 * z * z) / math.sqrt(2 * math.pi),
                                 np.linspace(-4, 4, 41)).passed
    vs.write_reports_json([rep], tmp_path / "r.json")
    vs.write_reports_csv([rep], tmp_path / "r.csv")
    assert json.loads((tmp_path / "r.json").read_text())[0]["passed"] is True
    assert (tmp_path / "r.csv").read_text().startswith("test_name,statistic")


def test_cdf_from_density():
    cdf = vs.cdf_from_density(lambda y: y * np.exp(-0.5 * y * y), 0.0, 12.0)
    z = np.linspace(0, 4, 9)
    assert np.allclose(cdf(z), 1 - np.exp(-0.5 * z * z), atol=1e-6)
