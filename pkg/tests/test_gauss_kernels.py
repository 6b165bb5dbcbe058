import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from meander import gauss_kernels as gk
from meander.errors import ConvergenceError, DomainError

mp.mp.dps = 40


def mp_kernel(s, u, y, v, mu):
    s, u, y, v, mu = map(mp.mpf, (s, u, y, v, mu))
    g = lambda z: mp.exp(-z * z / (2 * s)) / mp.sqrt(2 * mp.pi * s)
    return mp.exp(mu * (y - u) - mu * mu * s / 2) * (g(y - u) - g(y + u - 2 * v))


def mp_survival(t, u, v, mu):
    t, u, v, mu = map(mp.mpf, (t, u, v, mu))
    d = u - v
    a = (d + mu * t) / mp.sqrt(t)
    b = (-d + mu * t) / mp.sqrt(t)
    return mp.ncdf(a) - mp.exp(-2 * mu * d) * mp.ncdf(b)


@pytest.mark.parametrize("s,u,y,v,mu", [
    (1.0, 0.5, 0.7, 0.0, 0.0), (0.01, 1e-3, 2e-3, 0.0, 3.0), (4.0, 3.0, 9.0, 1.0, -2.0),
    (0.3, 0.2, 5.0, -1.0, 5.0), (2.0, 1e-6, 1.0, 0.0, -0.5),
])
def test_absorbed_kernel_matches_mpmath(s, u, y, v, mu):
    ref = float(mp_kernel(s, u, y, v, mu))
    assert gk.absorbed_kernel(s, u, y, v, mu) == pytest.approx(ref, rel=1e-12)


@pytest.mark.parametrize("t,u,v,mu", [
    (1.0, 0.5, 0.0, 0.5), (1.0, 1e-8, 0.0, 0.0), (4.0, 2.0, 1.0, -2.0), (0.1, 0.01, 0.0, -8.0),
    (1.0, 3.0, 0.0, -1.5), (9.0, 0.1, 0.0, 4.0), (1.0, 6.0, 0.0, -6.0),
])
def test_survival_matches_mpmath(t, u, v, mu):
    ref = float(mp_survival(t, u, v, mu))
    assert gk.survival_probability(t, u, v, mu) == pytest.approx(ref, rel=1e-10, abs=1e-300)


def test_survival_limit_and_monotone_in_time():
    for mu in (-1.0, 0.0, 0.7):
        vals = [gk.survival_probability(t, 0.4, 0.0, mu) for t in (0.1, 1, 10, 100, 1e4)]
        assert np.all(np.diff(vals) <= 0)
        lim = gk.survival_limit(0.4, 0.0, mu)
        assert vals[-1] >= lim - 1e-12
    assert gk.survival_limit(0.4, 0.0, 0.7) == pytest.approx(1 - math.exp(-2 * 0.7 * 0.4))
    assert gk.survival_limit(0.4, 0.0, -0.7) == 0.0


@settings(max_examples=60, deadline=None)
@given(st.floats(0.01, 10), st.floats(1e-6, 5), st.floats(-5, 5))
def test_survival_is_a_probability(t, d, mu):
    p = gk.survival_probability(t, d, 0.0, mu)
    assert 0.0 <= p <= 1.0 and np.isfinite(p)


def test_rho_matches_mpmath():
    for x in (-30.0, -5.0, -1.0, 0.0, 1.0, 4.9, 5.1, 20.0, 300.0):
        xm = mp.mpf(x)
        ref = 1 - xm * mp.exp(xm * xm / 2) * mp.sqrt(2 * mp.pi) * mp.ncdf(-xm)
        assert gk.rho(x) == pytest.approx(float(ref), rel=1e-12)


def test_rayleigh_exp_normalizer_by_quadrature():
    for t, mu in ((1.0, 0.0), (2.0, 1.5), (0.5, -3.0), (1.0, -12.0)):
        ref = mp.quad(lambda a: a * mp.exp(-a * a / (2 * t) + mu * a), [0, mp.inf])
        assert gk.rayleigh_exp_normalizer(t, mu) == pytest.approx(float(ref), rel=1e-12)


def test_chapman_kolmogorov_band_kernel():
    s1, s2, u, y, v, x, mu = 0.3, 0.5, 0.4, 0.9, 0.0, 1.2, 0.8
    f = lambda z: gk.band_kernel(s1, u, z, v, x, mu) * gk.band_kernel(s2, z, y, v, x, mu)
    lhs = gk.integrate_interval(f, v, x)
    assert lhs == pytest.approx(gk.band_kernel(s1 + s2, u, y, v, x, mu), rel=1e-10)


def test_band_kernel_images_and_sines_agree():
    a = np.linspace(0.01, 0.99, 9)
    L = 1.0
    for s in (0.5, 0.9, 1.1, 2.0):
        sines = (2 / L) * sum(np.sin(n * np.pi * a / L) * np.sin(n * np.pi * 0.3 / L)
                              * np.exp(-n * n * np.pi ** 2 * s / (2 * L * L)) for n in range(1, 200))
        assert np.allclose(gk.band_kernel_driftless(s, a, 0.3, L), sines, rtol=1e-12, atol=1e-15)


def test_band_kernel_wide_band_tends_to_absorbed_kernel():
    k_band = gk.band_kernel(0.5, 0.3, 0.8, 0.0, 50.0, 0.4)
    assert k_band == pytest.approx(gk.absorbed_kernel(0.5, 0.3, 0.8, 0.0, 0.4), rel=1e-14)


def test_domain_errors():
    with pytest.raises(DomainError):
        gk.absorbed_kernel(1.0, -0.1, 0.5)
    with pytest.raises(DomainError):
        gk.absorbed_kernel(0.0, 0.5, 0.5)
    with pytest.raises(DomainError):
        gk.KernelParams(1.0, 0.0, 1.0)
    with pytest.raises(DomainError):
        gk.NumericsConfig(quad_abs_tol=-1)


def test_series_reports_non_convergence():
    cfg = gk.NumericsConfig(series_max_terms=20)
    with pytest.raises(ConvergenceError) as err:
        gk.sum_one_sided(lambda n: 1.0 / n, cfg)
    assert err.value.estimate > 0


def test_semi_infinite_quadrature():
    val = gk.integrate_semi_infinite(lambda x: np.exp(-0.5 * x * x) / math.sqrt(2 * math.pi), 0.0)
    assert val == pytest.approx(0.5, abs=1e-12)
