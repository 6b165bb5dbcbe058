import math

import numpy as np
import pytest
from scipy import stats

from meander import representation as rp
from meander.errors import DomainError
from meander.meander_laws import MeanderSpec, marginal_density_at_barrier


def test_driftless_last_zero_is_arcsine():
    a = np.linspace(0.01, 1.99, 50)
    law = rp.LastZeroLaw(2.0, 0.0)
    assert np.allclose(rp.last_zero_density(law, a), 1 / (math.pi * np.sqrt(a * (2 - a))), rtol=1e-14)
    assert np.allclose(rp.last_zero_cdf(law, a), 2 / math.pi * np.arcsin(np.sqrt(a / 2)), atol=1e-14)


@pytest.mark.parametrize("mu", [-1.5, 0.7, 3.0])
def test_closed_form_density_matches_quadrature(mu):
    law = rp.LastZeroLaw(1.3, mu)
    a = np.linspace(0.02, 1.28, 20)
    assert np.allclose(rp.last_zero_density(law, a), rp.last_zero_density_quad(law, a), rtol=1e-12)


def test_cdf_derivative_is_density():
    law = rp.LastZeroLaw(1.0, 1.2)
    a = np.linspace(0.05, 0.95, 10)
    h = 1e-5
    deriv = (rp.last_zero_cdf(law, a + h) - rp.last_zero_cdf(law, a - h)) / (2 * h)
    assert np.allclose(deriv, rp.last_zero_density(law, a), rtol=1e-6)
    assert rp.last_zero_cdf(law, 1.0) == pytest.approx(1.0, abs=1e-14)


def test_last_zero_sampler_matches_cdf():
    law = rp.LastZeroLaw(1.0, 1.0)
    x = rp.sample_last_zero(law, np.random.default_rng(1), 20000)
    assert stats.kstest(x, lambda a: rp.last_zero_cdf(law, a)).pvalue > 0.01


def test_truncated_exponential_atom():
    law = rp.TruncExp(0.5, 1.0)
    x = rp.sample_truncated_exponential(law, np.random.default_rng(2), 100000)
    p = np.mean(x == 1.0)
    assert abs(p - law.atom_at_cutoff) < 4 * math.sqrt(p * (1 - p) / x.size)
    assert np.mean(x) == pytest.approx(law.mean(), abs=4 * np.std(x) / math.sqrt(x.size))


def test_sign_probability():
    assert rp.post_zero_sign_probability(0.5, 0.0) == pytest.approx(0.5)
    p = rp.post_zero_sign_probability(1.0, 1.0)
    assert p + rp.post_zero_sign_probability(1.0, -1.0) == pytest.approx(1.0, abs=1e-15)
    assert p > 0.9
    assert rp.post_zero_sign_probability(1.0, 30.0) == pytest.approx(1.0, abs=1e-12)


def test_barrier_meander_marginal_sampler():
    rng = np.random.default_rng(3)
    for m in (-2.0, 0.0, 1.5):
        x = rp.sample_barrier_meander_marginal(np.full(20000, m), 0.4, rng)
        spec = MeanderSpec(m, 0.0, None, 1.0)
        grid = np.linspace(1e-9, 8, 8001)
        f = marginal_density_at_barrier(spec, 0.4, grid)
        c = np.concatenate(([0], np.cumsum(0.5 * (f[1:] + f[:-1]) * np.diff(grid))))
        assert stats.kstest(x, lambda z: np.interp(z, grid, c)).pvalue > 0.01


def test_mixture_density_average():
    law = rp.LastZeroLaw(1.0, 0.0)
    y = np.array([0.5, 1.0])
    got = rp.rescaled_post_zero_density(law, 0.5, y, [0.1, 0.4, 0.7])
    ref = marginal_density_at_barrier(MeanderSpec(0.0, 0.0, None, 1.0), 0.5, y)
    assert np.allclose(got, ref, rtol=1e-14)


def test_validation():
    law = rp.LastZeroLaw(1.0, 0.5)
    with pytest.raises(DomainError):
        rp.last_zero_density(law, 1.5)
    with pytest.raises(DomainError):
        rp.rescaled_post_zero_density(law, 1.0, 0.5, [0.2])
    with pytest.raises(DomainError):
        rp.rescaled_post_zero_density(law, 0.5, 0.5, [0.2], "bogus")
    with pytest.raises(DomainError):
        rp.SignMix(1.5)
