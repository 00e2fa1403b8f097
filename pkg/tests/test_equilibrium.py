import math

import numpy as np
import pytest
from scipy import integrate, special, stats

from tankmix.equilibrium import (
    PiMarginal,
    betainc,
    ks_critical,
    ks_y,
    pi_invariance_test,
    pi_y_cdf,
    sample_pi,
    tail_integral,
    uniform_simplex_array,
)
from tankmix.experiments import tail_integral_exact
from tankmix.process import ModelParams, check_state, sample_pi_array
from tankmix.rng import RngStream

EPS = np.finfo(float).eps


@pytest.mark.parametrize("a,b", [(0.5, 1), (0.5, 2), (1, 1.5), (0.5, 7), (3.2, 0.7)])
def test_betainc_against_scipy(a, b):
    x = np.linspace(0, 1, 201)
    assert np.max(np.abs(betainc(a, b, x) - special.betainc(a, b, x))) < 1e-12


def test_pi_y_cdf_examples():
    p1, p2 = ModelParams(1), ModelParams(2)
    assert pi_y_cdf(1.0, p2) == pytest.approx(1.0, abs=1e-14)
    assert pi_y_cdf(0.0, p2) == 0.0
    assert pi_y_cdf(0.25, p1) == pytest.approx(0.5, abs=1e-12)
    ys = np.linspace(0, 1, 101)
    assert np.allclose(pi_y_cdf(ys, p1), np.sqrt(ys), atol=1e-12)


def test_pi_y_cdf_matches_density_integral():
    # density proportional to y^(-1/2) (1 - y) for m=2, integrated by quadrature
    f = lambda y: y**-0.5 * (1 - y)
    z = integrate.quad(f, 0, 1, epsabs=1e-13, epsrel=1e-13)[0]
    part = integrate.quad(f, 0, 0.2, epsabs=1e-13, epsrel=1e-13)[0]
    assert pi_y_cdf(0.2, ModelParams(2)) == pytest.approx(part / z, abs=1e-8)


def test_pi_y_cdf_monotone_and_domain():
    p = ModelParams(3, 2.0)
    v = pi_y_cdf(np.linspace(0, 2, 500), p)
    assert np.all(np.diff(v) >= 0)
    for bad in (-0.1, 2.1, np.nan):
        with pytest.raises(ValueError):
            pi_y_cdf(bad, p)


def test_min_x_marginal_against_simulation():
    p = ModelParams(3)
    marg = PiMarginal.of(p)
    s = sample_pi_array(p, 200_000, base_seed=4)
    mins = s[:, :-1].min(axis=1)
    assert stats.kstest(mins, marg.min_x_cdf).pvalue > 0.01
    q = np.array([0.1, 0.5, 0.9])
    assert np.allclose(marg.min_x_cdf(marg.min_x_ppf(q)), q, atol=1e-12)


def test_sample_pi_on_open_simplex():
    p = ModelParams(4, 3.0)
    rng = RngStream(1, 0)
    for _ in range(2000):
        s = sample_pi(p, rng)
        check_state(s, p)


@pytest.mark.parametrize("m,E", [(1, 1.0), (2, 1.0), (3, 2.5)])
def test_sample_pi_marginals(m, E):
    p = ModelParams(m, E)
    s = sample_pi_array(p, 100_000, base_seed=m)
    y = s[:, -1]
    assert stats.kstest(y / E, stats.beta(0.5, m).cdf).pvalue > 0.01
    for k in range(m):
        assert stats.kstest(s[:, k] / E, stats.beta(1, m - 0.5).cdf).pvalue > 0.01
    assert np.all(np.abs(s.sum(axis=1) - E) <= 8 * EPS * E)


def test_sample_pi_means_million():
    p = ModelParams(2)
    s = sample_pi_array(p, 1_000_000, base_seed=9)
    y, x = s[:, -1], s[:, :-1]
    se = y.std() / 1000
    assert abs(y.mean() - 0.2) < 3 * se
    for k in range(2):
        assert abs(x[:, k].mean() - 0.4) < 3 * x[:, k].std() / 1000


def test_exchangeability_two_sample():
    s = sample_pi_array(ModelParams(3), 50_000, base_seed=5)
    assert stats.ks_2samp(s[:25_000, 0], s[25_000:, 1]).pvalue > 0.01


def test_marginal_moments():
    marg = PiMarginal.of(ModelParams(2, 3.0))
    assert marg.mean_y == pytest.approx(3.0 / 5)
    assert marg.mean_x == pytest.approx(6.0 / 5)
    assert marg.var_y == pytest.approx(9.0 * stats.beta(0.5, 2).var())


def test_invariance_ks():
    p = ModelParams(2)
    n = 100_000
    d = pi_invariance_test(p, 5.0, n, base_seed=3)
    assert d < ks_critical(n, 0.01)


def test_invariance_at_time_zero_is_noise_floor():
    p = ModelParams(2)
    n = 50_000
    d0 = pi_invariance_test(p, 0.0, n, base_seed=3)
    assert d0 < ks_critical(n, 0.01)


def test_wrong_density_fails():
    p = ModelParams(2)
    wrong = uniform_simplex_array(p, 100_000, RngStream(0, 0))
    assert ks_y(wrong[:, -1], p)[1] < 1e-6


def test_tail_integral_finite_and_stable():
    p = ModelParams(2)
    s = sample_pi_array(p, 1_000_000, base_seed=6)
    exact = tail_integral_exact(p, 0.125)
    a = tail_integral(s[:100_000], 0.125)
    b = tail_integral(s, 0.125)
    assert math.isfinite(a) and math.isfinite(b)
    assert abs(b - exact) / exact < 0.02
    assert abs(a - b) / b < 0.05


def test_tail_integral_exact_by_quadrature():
    # m=1: E[x^p] with x ~ Beta(1, 1/2), E[y^q] with y ~ Beta(1/2, 1)
    p, q = 2 * 0.3 - 1, 0.3 - 0.5
    ex = integrate.quad(lambda x: x**p * stats.beta(1, 0.5).pdf(x), 0, 1, limit=200)[0]
    ey = integrate.quad(lambda y: y**q * stats.beta(0.5, 1).pdf(y), 0, 1, limit=200)[0]
    assert tail_integral_exact(ModelParams(1), 0.3) == pytest.approx(ex + ey, rel=1e-7)
