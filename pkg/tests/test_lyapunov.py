import math

import mpmath

import numpy as np
import pytest
from scipy import integrate, optimize, stats

from tankmix.lyapunov import (
    C1,
    C2,
    LyapunovParams,
    Q_i,
    Q_i_monte_carlo,
    Q_parts,
    Q_upper_bound,
    RegionLabel,
    beta_of,
    boundary_grid,
    classify_region,
    drift_check_one_jump,
    drift_check_Ph,
    drift_margin,
    fit_c_star,
    generator_V,
    in_B,
    interior_grid,
    lyapunov_V,
    lyapunov_V_array,
    sup_V_outside_B,
)
from tankmix.process import EnergyState, ModelParams, one_jump_states, run_ensemble, tilted_states, total_rate
from tankmix.rng import RngStream


def random_states(n, m, seed, log_scale=False):
    g = np.random.Generator(np.random.Philox(key=[seed, 99]))
    if log_scale:
        w = 10.0 ** g.uniform(-9, 0, size=(n, m + 1))
    else:
        w = g.dirichlet(np.ones(m + 1), size=n)
    w = w / w.sum(axis=1, keepdims=True)
    return [EnergyState.from_array(r) for r in w]


def parts_after_jump(state, alpha_p, alpha_t):
    """Predicted means of sum x**(-2 alpha_p) and y**(-alpha_t) after one jump."""
    rate = total_rate(state)
    gp = sum(Q_parts(state, i, alpha_p)[0] for i in range(state.m))
    gt = sum(Q_parts(state, i, alpha_t)[1] for i in range(state.m))
    vp = float(np.sum(state.x ** (-2 * alpha_p)))
    vt = state.y ** (-alpha_t)
    return vp + gp / rate, vt + gt / rate, gp, gt


# --------------------------------------------------------------------------- V


def test_V_examples():
    assert lyapunov_V(EnergyState(np.array([1.0]), 1.0), 0.25) == pytest.approx(2.0)
    v = lyapunov_V(EnergyState(np.array([0.25, 0.25]), 0.5), 0.25)
    assert v == pytest.approx(4 + 2**0.25, rel=1e-14)
    assert lyapunov_V(EnergyState.from_x([1e-12, 0.5]), 0.45) > 1e5


def test_V_domain_error():
    with pytest.raises(ValueError):
        lyapunov_V(EnergyState(np.array([0.0, 0.5]), 0.5), 0.45)


def test_V_array_matches_scalar():
    st = random_states(50, 3, 1)
    arr = np.array([s.as_array() for s in st])
    assert np.allclose(lyapunov_V_array(arr, 0.4), [lyapunov_V(s, 0.4) for s in st], rtol=1e-14)


def _v_minimizer(alpha, m=2):
    # stationarity: 2 alpha x**(-2 alpha - 1) = alpha y**(-alpha - 1) with m x + y = 1
    f = lambda y: 2 * (((1 - y) / m) ** (-2 * alpha - 1)) - y ** (-alpha - 1)
    y = optimize.brentq(f, 1e-6, 1 - 1e-6, xtol=1e-15)
    return EnergyState.from_x(np.full(m, (1 - y) / m))


def test_V_minimum_and_convexity():
    best = _v_minimizer(0.45)
    v_best = lyapunov_V(best, 0.45)
    arr = np.array([s.as_array() for s in random_states(20_000, 2, 2)])
    vals = lyapunov_V_array(arr, 0.45)
    assert np.all(vals >= v_best)
    # the equal split is not the minimizer: the tank term carries half the exponent
    assert lyapunov_V(EnergyState.from_x([1 / 3, 1 / 3]), 0.45) > v_best
    # midpoint convexity on random pairs
    a, b = arr[:10_000], arr[10_000:]
    mid = lyapunov_V_array((a + b) / 2, 0.45)
    assert np.all(mid <= (lyapunov_V_array(a, 0.45) + lyapunov_V_array(b, 0.45)) / 2 + 1e-12)


@pytest.mark.parametrize("alpha", [0.26, 0.3, 0.4375, 0.45, 0.49])
def test_beta_identity(alpha):
    b = beta_of(alpha)
    assert b == 1 - 1 / (4 * alpha)
    assert 0 < b < 0.5


# --------------------------------------------------------------------------- constants


def test_C_constants_at_quarter():
    assert C1(0.25) == pytest.approx(math.pi / 2, abs=1e-10)
    assert C2(0.25) == pytest.approx(2.0, abs=1e-10)


@pytest.mark.parametrize("alpha", [0.3, 0.45, 0.49])
def test_C_constants_against_weighted_quadrature(alpha):
    # algebraic end-point weights handle the singularities exactly
    c1 = integrate.quad(lambda u: (1 + u) ** (-2 * alpha), 0, 1, weight="alg", wvar=(0, -2 * alpha),
                        epsabs=1e-14, epsrel=1e-13)[0]
    c2 = integrate.quad(lambda u: 1.0, 0, 1, weight="alg", wvar=(-2 * alpha, 0), epsabs=1e-14, epsrel=1e-13)[0]
    assert C1(alpha) == pytest.approx(c1, abs=1e-8)
    assert C2(alpha) == pytest.approx(c2, abs=1e-8)


def test_C_domain():
    for bad in (0.5, 0.7, 0.0):
        with pytest.raises(ValueError):
            C1(bad)
        with pytest.raises(ValueError):
            C2(bad)


# --------------------------------------------------------------------------- Q_i


def test_Q_closed_form_arcsin():
    assert Q_i(EnergyState(np.array([1.0]), 1.0), 0, 0.25) == pytest.approx(math.pi / 4, abs=1e-8)


def test_Q_domain_error():
    with pytest.raises(ValueError):
        Q_i(EnergyState(np.array([0.5]), 0.0), 0, 0.45)


def test_Q_upper_bound_random_states():
    st = random_states(5000, 2, 3) + random_states(5000, 2, 4, log_scale=True)
    for s in st:
        for i in range(s.m):
            q = Q_i(s, i, 0.45)
            ub = Q_upper_bound(s, i, 0.45)
            assert q <= ub + 1e-9 * abs(ub)


def test_Q_against_monte_carlo_random_states():
    # 100 independent 3-sigma checks: exceedances must be as rare as the nominal
    # 0.27% rate allows, the z-scores must look standard normal, and every
    # exceedance must agree again at ten times the sample size on a fresh stream
    st = random_states(100, 2, 5)
    rng = RngStream(17, 0)
    z = []
    for s in st:
        mc, se = Q_i_monte_carlo(s, 0, 0.45, 1_000_000, rng)
        z.append((Q_i(s, 0, 0.45) - mc) / se)
    z = np.array(z)
    out = np.flatnonzero(np.abs(z) >= 3)
    assert out.size <= 2
    assert stats.kstest(z, "norm").pvalue > 0.01
    for k in out:
        mc, se = Q_i_monte_carlo(st[k], 0, 0.45, 10_000_000, RngStream(18, int(k)))
        assert abs(Q_i(st[k], 0, 0.45) - mc) < 3 * se


def test_Q_quadrature_near_tank_boundary():
    # the smooth integrand peaks sharply near u=1 when y << x; 30-digit reference
    x, y, a = 0.6, 1e-10, 0.45
    s = EnergyState(np.array([x, 0.4 - y]), y)
    mpmath.mp.dps = 30
    X, Y = mpmath.mpf(x), mpmath.mpf(y)
    cuts = [0] + [1 - mpmath.mpf(10) ** -k for k in range(1, 12)] + [1]
    ref = mpmath.quad(lambda u: (X * (1 - u * u) + Y) ** mpmath.mpf(-2 * a), cuts)
    part = Q_parts(s, 0, a)[0]
    assert part == pytest.approx(math.sqrt(x) * (float(ref) - x ** (-2 * a)), rel=1e-8)


# --------------------------------------------------------------------------- generator


def test_generator_finite_difference():
    # particle part at alpha=0.45 and tank part at 0.2 (finite-variance exponents)
    s = EnergyState.from_x([0.3, 0.3])
    delta, n = 0.002, 1_000_000
    res = run_ensemble(s, delta, n, [delta], base_seed=31)
    after = res.at(0)
    _, _, gp, gt = parts_after_jump(s, 0.45, 0.2)
    dp = (np.sum(after[:, :-1] ** -0.9, axis=1) - np.sum(s.x**-0.9)) / delta
    dt = (after[:, -1] ** -0.2 - s.y**-0.2) / delta
    for est, exact in ((dp, gp), (dt, gt)):
        se = est.std(ddof=1) / math.sqrt(n)
        assert abs(est.mean() - exact) < 3 * se
    assert math.isfinite(generator_V(s, 0.45))


def test_generator_is_sum_of_Q():
    s = EnergyState.from_x([0.1, 0.2, 0.3])
    assert generator_V(s, 0.4) == pytest.approx(sum(Q_i(s, i, 0.4) for i in range(3)), rel=1e-14)


# --------------------------------------------------------------------------- regions


@pytest.fixture
def lp2():
    return LyapunovParams.default(ModelParams(2))


def test_params_validation():
    with pytest.raises(ValueError):
        LyapunovParams(0.55, 1e-4, 0.01, 10.0, 0.1)
    with pytest.raises(ValueError):
        LyapunovParams(0.45, 0.01, 0.01, 10.0, 0.1)
    lp = LyapunovParams(0.45, 1e-3, 0.01, 10.0, 0.5)
    with pytest.raises(ValueError):
        lp.check_against(ModelParams(2))


def test_default_constants(lp2):
    assert lp2.eps1 == pytest.approx(1 / 80)
    assert lp2.eps0 == pytest.approx(lp2.eps1 * 4 ** (-1 / 0.9) / 10)
    assert lp2.level_M == pytest.approx(2 * sup_V_outside_B(ModelParams(2), 0.45, lp2.eps0))
    assert lp2.h == pytest.approx(0.5 / math.sqrt(2))


def test_sup_V_outside_B_by_sampling(lp2):
    p = ModelParams(2)
    d = lp2.particle_scale * lp2.eps0
    arr = np.array([s.as_array() for s in random_states(200_000, 2, 6, log_scale=True)])
    keep = (arr[:, :-1].min(axis=1) >= d) & (arr[:, -1] >= lp2.eps0)
    assert lyapunov_V_array(arr[keep], 0.45).max() <= sup_V_outside_B(p, 0.45, lp2.eps0) * (1 + 1e-12)


def test_region_examples(lp2):
    assert classify_region(EnergyState.from_x([0.3, 0.3]), lp2) is RegionLabel.INTERIOR
    x1 = lp2.particle_scale * lp2.eps0 / 10
    assert classify_region(EnergyState.from_x([x1, 0.5 - x1]), lp2) is RegionLabel.I
    s2 = EnergyState.from_x([x1, 1 - x1 - lp2.eps1 / 2])
    assert classify_region(s2, lp2) is RegionLabel.II
    s3 = EnergyState.from_x([0.5, 0.5 - 1e-9])
    assert classify_region(s3, lp2) is RegionLabel.III


def test_regions_partition_B(lp2):
    for s in random_states(100_000, 2, 7, log_scale=True):
        label = classify_region(s, lp2)
        assert (label is not RegionLabel.INTERIOR) == in_B(s, lp2)


# --------------------------------------------------------------------------- drift


def test_one_jump_margin_region_I(lp2):
    s = EnergyState.from_x([1e-6, 0.5])
    assert drift_check_one_jump(s, lp2) > 0


def test_one_jump_rejects_interior(lp2):
    with pytest.raises(ValueError):
        drift_check_one_jump(EnergyState.from_x([0.3, 0.3]), lp2)


def test_one_jump_margin_sweep_stabilizes(lp2):
    xs = 10.0 ** np.arange(-9, -4.5, 0.5)
    margins = np.array([drift_check_one_jump(EnergyState.from_x([x, 0.5]), lp2) for x in xs])
    assert np.all(margins > 0.5)
    assert abs(margins[0] - margins[1]) < 0.01


def test_one_jump_monte_carlo(lp2):
    s = EnergyState.from_x([1e-6, 0.5])
    n = 1_000_000
    after = one_jump_states(s, n, base_seed=41)
    ep, et, _, _ = parts_after_jump(s, 0.45, 0.2)
    vp = np.sum(after[:, :-1] ** -0.9, axis=1)
    vt = after[:, -1] ** -0.2
    for v, exact in ((vp, ep), (vt, et)):
        assert abs(v.mean() - exact) < 3 * v.std(ddof=1) / math.sqrt(n)


def test_boundary_grid_margins_positive():
    p = ModelParams(2)
    eps1 = 0.1 / (2 * 2)
    lp = LyapunovParams(0.45, 1e-3, eps1, 2 * sup_V_outside_B(p, 0.45, 1e-3), 0.5 / math.sqrt(2))
    grid = boundary_grid(p, lp, 16)
    labels = {classify_region(s, lp) for s in grid}
    assert labels == {RegionLabel.I, RegionLabel.II, RegionLabel.III}
    c_star, margins = fit_c_star(grid, lp.alpha)
    assert c_star > 0 and np.all(margins > 0)


def test_interior_generator_bounded(lp2):
    inner = interior_grid(ModelParams(2), lp2, 15)
    assert all(classify_region(s, lp2) is RegionLabel.INTERIOR for s in inner)
    g = np.array([generator_V(s, 0.45) for s in inner])
    assert np.all(np.isfinite(g)) and g.max() < 100


def test_Ph_negative_above_10M(lp2):
    x1 = (10 * lp2.level_M) ** (-1 / 0.9) / 2
    s = EnergyState.from_x([x1, 0.5])
    assert lyapunov_V(s, 0.45) > 10 * lp2.level_M
    est = drift_check_Ph(s, lp2, 100_000, base_seed=5)
    assert est.ci_hi < 0
    half = LyapunovParams(lp2.alpha, lp2.eps0, lp2.eps1, lp2.level_M, lp2.h / 2)
    assert drift_check_Ph(s, half, 100_000, base_seed=6).ci_hi < 0


def test_Ph_bounded_on_interior(lp2):
    inner = interior_grid(ModelParams(2), lp2, 6)
    worst = max(drift_check_Ph(s, lp2, 20_000, base_seed=k).ci_hi for k, s in enumerate(inner))
    assert math.isfinite(worst) and worst < 100


def test_tilted_weights_trivial_without_tilt():
    s = EnergyState.from_x([0.3, 0.5])
    _, w = tilted_states(s, 2.0, 1000, 1.0, base_seed=3)
    assert np.all(w == 1.0)


def test_tilted_states_worker_invariant():
    s = EnergyState.from_x([1e-3, 0.6])
    a, wa = tilted_states(s, 1.0, 5000, 20.0, base_seed=4, worker_count=1)
    b, wb = tilted_states(s, 1.0, 5000, 20.0, base_seed=4, worker_count=4)
    assert np.array_equal(a, b) and np.array_equal(wa, wb)


def test_tilted_estimator_unbiased():
    # exponent 0.2 keeps the plain estimator's variance finite, so both CIs are valid
    s = EnergyState.from_x([1e-3, 0.6])
    n = 200_000
    states, w = tilted_states(s, 1.0, n, 20.0, base_seed=8)
    assert abs(w.mean() - 1.0) <= 4 * w.std(ddof=1) / math.sqrt(n)
    a = w * lyapunov_V_array(states, 0.2)
    b = lyapunov_V_array(run_ensemble(s, 1.0, n, [1.0], 9).at(0), 0.2)
    se = math.hypot(a.std(ddof=1), b.std(ddof=1)) / math.sqrt(n)
    assert abs(a.mean() - b.mean()) <= 4 * se


def test_Ph_importance_matches_plain_where_dominated_by_particles(lp2):
    x1 = (10 * lp2.level_M) ** (-1 / 0.9) / 2
    s = EnergyState.from_x([x1, 0.5])
    a = drift_check_Ph(s, lp2, 400_000, base_seed=10)
    b = drift_check_Ph(s, lp2, 400_000, base_seed=11, importance=False)
    assert abs(a.mean - b.mean) <= 4 * math.hypot(a.stderr, b.stderr)
