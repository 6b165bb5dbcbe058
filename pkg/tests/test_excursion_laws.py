import math

import numpy as np
import pytest

from meander import excursion_laws as ex
from meander.errors import DomainError
from meander.gauss_kernels import integrate_semi_infinite
from meander.meander_laws import TimeValueGrid


@pytest.mark.parametrize("mu", [-3.0, 0.0, 2.0])
def test_marginal_normalizes(mu):
    spec = ex.ExcursionSpec(mu, 0.5, 0.9, 1.7, 2.0)
    for s in (0.1, 1.0, 1.9):
        val = integrate_semi_infinite(lambda y: ex.excursion_marginal_density(spec, s, y), 0.5)
        assert val == pytest.approx(1.0, abs=1e-10)


def test_drift_cancels():
    y = np.linspace(0.05, 4, 40)
    for mu in (-3.0, 2.0, 7.0):
        spec = ex.ExcursionSpec(mu, 0.0, 0.4, 1.1, 1.0)
        a = ex.excursion_marginal_density(spec, 0.35, y)
        b = ex.excursion_marginal_density_tilted(spec, 0.35, y)
        assert np.allclose(a, b, rtol=1e-12, atol=0)
        grid = TimeValueGrid([0.2, 0.5, 0.9], [0.3, 1.0, 0.6])
        assert ex.excursion_joint_density_tilted(spec, grid) == pytest.approx(ex.excursion_joint_density(spec, grid),
                                                                              rel=1e-12)


def test_both_limits_is_the_limit_of_small_endpoints():
    y = np.linspace(0.05, 3, 30)
    lim = ex.excursion_limit_marginal_density(1.0, 0.3, y)
    errs = []
    for e in (1e-1, 1e-2, 1e-3):
        f = ex.excursion_marginal_density(ex.ExcursionSpec(0.0, 0.0, e, e, 1.0), 0.3, y)
        errs.append(np.max(np.abs(f - lim)))
    assert errs[0] > errs[1] > errs[2] and errs[2] < 1e-5


def test_start_limit_is_the_limit_of_small_start():
    y = np.linspace(0.05, 3, 30)
    lim = ex.excursion_limit_marginal_density(1.0, 0.6, y, "start-limit", 0.8)
    f = ex.excursion_marginal_density(ex.ExcursionSpec(0.0, 0.0, 1e-4, 0.8, 1.0), 0.6, y)
    assert np.max(np.abs(f - lim)) < 1e-6


def test_limit_joint_matches_marginal_for_one_time():
    grid = TimeValueGrid([0.4], [0.9])
    assert ex.excursion_limit_joint_density(1.0, grid) == pytest.approx(
        float(ex.excursion_limit_marginal_density(1.0, 0.4, 0.9)), rel=1e-13)
    assert ex.excursion_limit_joint_density(1.0, grid, "start-limit", 1.3) == pytest.approx(
        float(ex.excursion_limit_marginal_density(1.0, 0.4, 0.9, "start-limit", 1.3)), rel=1e-13)


def test_both_limits_time_reversal():
    y = np.linspace(0.05, 3, 12)
    assert np.array_equal(ex.excursion_limit_marginal_density(2.0, 0.5, y),
                          ex.excursion_limit_marginal_density(2.0, 1.5, y))


def test_both_limits_normalizes():
    val = integrate_semi_infinite(lambda y: ex.excursion_limit_marginal_density(1.0, 0.3, y), 0.0, scale=0.5)
    assert val == pytest.approx(1.0, abs=1e-12)
    assert math.isfinite(ex.log_excursion_limit_joint_density(1.0, TimeValueGrid([0.2, 0.7], [0.4, 0.5])))


def test_validation():
    with pytest.raises(DomainError):
        ex.ExcursionSpec(0.0, 0.0, -0.1, 1.0, 1.0)
    with pytest.raises(DomainError):
        ex.excursion_marginal_density(ex.ExcursionSpec(), 1.0, 0.5)
    with pytest.raises(DomainError):
        ex.excursion_limit_marginal_density(1.0, 0.5, 0.5, "start-limit")
    with pytest.raises(DomainError):
        ex.excursion_limit_joint_density(1.0, TimeValueGrid([0.5], [1.0]), "nonsense")
