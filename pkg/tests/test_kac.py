import itertools
import math

import numpy as np
import pytest
from scipy import stats

from tankmix.kac import KacState, kac_rotate, kac_simulate, kac_step, sphere_sample, v1_cdf, v1_squared_cdf
from tankmix.rng import RngStream

EPS = np.finfo(float).eps


def test_needs_two_particles():
    with pytest.raises(ValueError):
        KacState([1.0])


def test_rotation_special_angles():
    s = KacState([0.6, 0.8, 0.0])
    assert np.allclose(kac_rotate(s, 0, 1, 0.0).v, s.v, atol=0)
    q = kac_rotate(s, 0, 1, math.pi / 2).v
    assert q == pytest.approx([-0.8, 0.6, 0.0], abs=1e-15)


def test_rotation_is_orthogonal_pairwise():
    rng = RngStream(1, 0)
    s = KacState(np.arange(1.0, 6.0))
    for _ in range(1000):
        t = kac_step(s, rng)
        changed = np.flatnonzero(np.abs(t.v - s.v) > 1e-12 * np.abs(s.v).max())
        if changed.size == 2:
            i, j = changed
            assert math.hypot(t.v[i], t.v[j]) == pytest.approx(math.hypot(s.v[i], s.v[j]), rel=1e-13)
        s = t


def test_pairs_uniform_over_unordered():
    rng = RngStream(2, 0)
    n = 5
    s = KacState(np.ones(n))
    counts = dict.fromkeys(itertools.combinations(range(n), 2), 0)
    for _ in range(40_000):
        t = kac_step(s, rng)
        i, j = np.flatnonzero(np.abs(t.v - s.v) > 1e-12)[:2]
        counts[(i, j)] += 1
    assert stats.chisquare(list(counts.values())).pvalue > 0.01


def test_energy_conserved_over_a_million_collisions():
    v0 = np.zeros(10)
    v0[0] = 1.0
    times = np.linspace(0, 100_000, 51)
    ens = kac_simulate(KacState(v0), times, 1, base_seed=3)
    assert ens.event_counts[0, -1] > 990_000
    e = np.sum(ens.states[0] ** 2, axis=1)
    assert np.all(np.abs(e - 1.0) <= 8 * EPS)


def test_event_count_is_poisson():
    T, N, n = 2.0, 10, 20_000
    ens = kac_simulate(KacState(np.ones(N)), [T], n, base_seed=4)
    c = ens.event_counts[:, 0]
    assert abs(c.mean() - N * T) < 3 * math.sqrt(N * T / n)
    assert c.var() == pytest.approx(N * T, rel=0.05)


def test_sphere_marginal_oracle():
    # analytic one-coordinate marginal against direct sphere sampling
    pts = sphere_sample(10, 1.0, 50_000, RngStream(5, 0))
    assert np.allclose(np.sum(pts**2, axis=1), 1.0, atol=1e-14)
    assert stats.kstest(pts[:, 0], lambda v: v1_cdf(v, 10, 1.0)).pvalue > 0.01
    assert stats.kstest(pts[:, 3] ** 2, lambda s: v1_squared_cdf(s, 10, 1.0)).pvalue > 0.01


def test_relaxes_to_sphere_marginal():
    v0 = np.zeros(10)
    v0[0] = 1.0
    ens = kac_simulate(KacState(v0), [30.0], 50_000, base_seed=6)
    v = ens.states[:, 0, :]
    assert stats.kstest(v[:, 0], lambda x: v1_cdf(x, 10, 1.0)).pvalue > 0.01
    # exchangeability at stationarity
    assert stats.ks_2samp(v[:25_000, 2], v[25_000:, 7]).pvalue > 0.01


def test_worker_independence():
    s = KacState(np.arange(1.0, 5.0))
    a = kac_simulate(s, [0.5, 2.0], 5000, base_seed=7, worker_count=1)
    b = kac_simulate(s, [0.5, 2.0], 5000, base_seed=7, worker_count=8)
    assert np.array_equal(a.states, b.states) and np.array_equal(a.event_counts, b.event_counts)
