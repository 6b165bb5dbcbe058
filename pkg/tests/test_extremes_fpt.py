import math

import mpmath as mp
import numpy as np
import pytest

from meander import extremes_fpt as fx
from meander import meander_laws as ml
from meander.errors import DomainError
from meander.gauss_kernels import integrate_interval


@pytest.mark.parametrize("mu", [-2.0, -0.5, 0.0, 0.5, 2.0])
def test_three_routes_agree(mu):
    for t in (0.5, 1.0, 4.0):
        for x in np.array([0.2, 0.7, 1.5, 3.0]) * math.sqrt(t):
            g = fx.max_cdf_at_barrier_general(t, 0.0, x, mu)
            assert fx.max_cdf_at_barrier_v0(t, x, mu) == pytest.approx(g, abs=1e-10)
            assert fx.max_cdf_at_barrier_spectral(t, 0.0, x, mu) == pytest.approx(g, abs=1e-10)


def test_driftless_theta_series_by_jacobi_theta():
    for t in (0.5, 1.0, 4.0):
        for x in (0.3, 1.0, 2.5):
            ref = mp.jtheta(4, 0, mp.exp(-x * x / (2 * t)))
            got = fx.max_cdf_at_barrier(fx.MaxQuery(ml.MeanderSpec(0.0, 0.0, None, t), x))
            assert got == pytest.approx(float(ref), abs=1e-12)


def test_driftless_jacobi_form_constant():
    t, x = 1.0, 0.3
    odd = sum(math.exp(-n * n * math.pi ** 2 * t / (2 * x * x)) for n in range(1, 60, 2))
    ref = math.sqrt(8 * math.pi * t) / x * odd
    assert fx.max_cdf_at_barrier_spectral(t, 0.0, x, 0.0) == pytest.approx(ref, rel=1e-12)
    assert fx.max_cdf_at_barrier_general(t, 0.0, x, 0.0) == pytest.approx(ref, rel=1e-9)


def test_cdf_limits():
    spec = ml.MeanderSpec(0.3, 0.0, None, 1.0)
    assert fx.max_cdf_at_barrier(fx.MaxQuery(spec, 12.0)) == pytest.approx(1.0, abs=1e-14)
    assert 0.0 <= fx.max_cdf_at_barrier(fx.MaxQuery(spec, 1e-3)) <= 1e-6
    above = ml.MeanderSpec(0.3, 0.0, 0.5, 1.0)
    vals = [fx.max_cdf(fx.MaxQuery(above, x)) for x in np.linspace(0.51, 10, 20)]
    assert np.all(np.diff(vals) >= 0) and vals[-1] == pytest.approx(1.0, abs=1e-10)


def test_max_before_horizon_by_direct_band_integral():
    spec = ml.MeanderSpec(0.4, 0.0, 0.3, 1.0)
    q = fx.MaxQuery(spec, 1.1, 0.6)
    mp.mp.dps = 25
    L, u, mu = 1.1, 0.3, 0.4
    g = lambda z, r: mp.exp(-z * z / (2 * r)) / mp.sqrt(2 * mp.pi * r)
    band = lambda y: mp.exp(mu * (y - u) - mu * mu * 0.3) * mp.nsum(
        lambda k: g(y - u - 2 * k * L, 0.6) - g(y + u - 2 * k * L, 0.6), [-mp.inf, mp.inf])
    surv = lambda r, a: mp.ncdf((a + mu * r) / mp.sqrt(r)) - mp.exp(-2 * mu * a) * mp.ncdf((-a + mu * r) / mp.sqrt(r))
    ref = mp.quad(lambda y: band(y) * surv(0.4, y), [0, L]) / surv(1.0, u)
    assert fx.max_cdf(q) == pytest.approx(float(ref), rel=1e-9)


def test_before_horizon_tends_to_horizon_value():
    spec = ml.MeanderSpec(0.5, 0.0, None, 1.0)
    at = fx.max_cdf_at_barrier(fx.MaxQuery(spec, 1.0))
    gaps = [abs(fx.max_cdf_at_barrier(fx.MaxQuery(spec, 1.0, 1 - h)) - at) for h in (1e-2, 1e-3, 1e-4)]
    assert gaps[0] > gaps[1] > gaps[2]


def test_fpt_survival_is_one_at_small_times_and_zero_below_start():
    spec = ml.MeanderSpec(0.2, 0.0, 0.5, 1.0)
    assert fx.fpt_survival(fx.FptQuery(spec, 1.5, 2.0, 1e-3)) == pytest.approx(1.0, abs=1e-12)
    assert fx.fpt_survival(fx.FptQuery(spec, 0.4, 2.0, 0.5)) == 0.0


def test_post_horizon_density_is_derivative_of_cdf():
    spec = ml.MeanderSpec(-0.3, 0.0, None, 1.0)
    x, tp = 1.2, 3.0
    for s in (1.2, 2.0, 2.9):
        h = 1e-4
        deriv = (fx.fpt_cdf(fx.FptQuery(spec, x, tp, s + h)) - fx.fpt_cdf(fx.FptQuery(spec, x, tp, s - h))) / (2 * h)
        assert fx.fpt_density_post_horizon(fx.FptQuery(spec, x, tp, s)) == pytest.approx(deriv, rel=1e-6)


def test_fpt_cdf_continuous_at_horizon_and_total_mass():
    spec = ml.MeanderSpec(0.6, 0.0, 0.4, 1.0)
    x = 1.3
    left = fx.fpt_cdf(fx.FptQuery(spec, x, 5.0, 1.0))
    right = fx.fpt_cdf(fx.FptQuery(spec, x, 5.0, 1.0 + 1e-9))
    assert right == pytest.approx(left, abs=1e-7)
    assert fx.never_passage_probability(spec, x) == pytest.approx(0.0, abs=1e-10)
    neg = ml.MeanderSpec(-0.6, 0.0, 0.4, 1.0)
    assert 0.0 < fx.never_passage_probability(neg, x) < 1.0


def test_free_fpt_cdf_integrates_density():
    for mu in (-1.0, 0.5):
        ref = integrate_interval(lambda tau: fx.free_fpt_density(tau, 0.7, mu), 0.0, 2.0)
        assert fx.free_fpt_cdf(2.0, 0.7, mu) == pytest.approx(ref, rel=1e-10)
    assert float(fx.free_fpt_cdf(math.inf, 0.7, -1.0)) == pytest.approx(math.exp(-1.4))


def test_query_validation():
    spec = ml.MeanderSpec(0.0, 0.0, 0.5, 1.0)
    with pytest.raises(DomainError):
        fx.MaxQuery(spec, 0.4)
    with pytest.raises(DomainError):
        fx.MaxQuery(spec, 1.0, 2.0)
    with pytest.raises(DomainError):
        fx.FptQuery(spec, 1.0, 0.5, 0.2)
    with pytest.raises(DomainError):
        fx.max_cdf_at_barrier(fx.MaxQuery(spec, 1.0))
