"""Invariant measure: density proportional to ``y**-1/2`` on the simplex.

Under this law ``(x_1, ..., x_m, y) / E`` is Dirichlet(1, ..., 1, 1/2), so

* ``y / E ~ Beta(1/2, m)``,
* ``x_i / E ~ Beta(1, m - 1/2)``,
* ``P(min_i x_i > a) = (1 - m a / E) ** (m - 1/2)`` for ``0 <= a <= E / m``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba as nb
import numpy as np
from scipy import stats as _st

from .process import EnergyState, ModelParams, run_ensemble, sample_pi_array
from .rng import RngStream
from . import process as _proc

_CF_TOL = 1e-10
_CF_MAX_ITER = 500
_TINY = 1e-300


@nb.njit(cache=True)
def _betacf(a, b, x):
    # modified Lentz evaluation of the incomplete-beta continued fraction
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _TINY:
        d = _TINY
    d = 1.0 / d
    h = d
    for k in range(1, _CF_MAX_ITER + 1):
        m2 = 2 * k
        aa = k * (b - k) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        h *= d * c
        aa = -(a + k) * (qab + k) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _CF_TOL * 1e-3:
            break
    return h


@nb.njit(cache=True)
def _betainc_scalar(a, b, x):
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    lbt = math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b) + a * math.log(x) + b * math.log1p(-x)
    if x < (a + 1.0) / (a + b + 2.0):
        return math.exp(lbt) * _betacf(a, b, x) / a
    return 1.0 - math.exp(lbt) * _betacf(b, a, 1.0 - x) / b


@nb.njit(cache=True)
def _betainc_array(a, b, xs, out):
    for k in range(xs.size):
        out[k] = _betainc_scalar(a, b, xs[k])


def betainc(a: float, b: float, x):
    """Regularized incomplete beta ``I_x(a, b)``, elementwise over ``x``."""
    if a <= 0 or b <= 0:
        raise ValueError("beta parameters must be positive")
    xs = np.asarray(x, dtype=np.float64)
    flat = np.ascontiguousarray(xs.reshape(-1))
    out = np.empty_like(flat)
    _betainc_array(float(a), float(b), flat, out)
    return out.reshape(xs.shape) if xs.ndim else float(out[0])


@dataclass(frozen=True)
class PiMarginal:
    """Analytic one-dimensional marginals of the invariant measure."""

    m: int
    total_energy: float = 1.0

    @classmethod
    def of(cls, params: ModelParams) -> "PiMarginal":
        return cls(params.m, params.total_energy)

    @property
    def mean_y(self) -> float:
        return self.total_energy / (2 * self.m + 1)

    @property
    def mean_x(self) -> float:
        return 2 * self.total_energy / (2 * self.m + 1)

    @property
    def var_y(self) -> float:
        a, b = 0.5, float(self.m)
        return self.total_energy**2 * a * b / ((a + b) ** 2 * (a + b + 1))

    def y_cdf(self, y):
        return betainc(0.5, self.m, np.asarray(y, dtype=np.float64) / self.total_energy)

    def x_cdf(self, x):
        return betainc(1.0, self.m - 0.5, np.asarray(x, dtype=np.float64) / self.total_energy)

    def min_x_cdf(self, a):
        z = np.clip(self.m * np.asarray(a, dtype=np.float64) / self.total_energy, 0.0, 1.0)
        return 1.0 - (1.0 - z) ** (self.m - 0.5)

    def min_x_ppf(self, q):
        q = np.asarray(q, dtype=np.float64)
        return self.total_energy / self.m * (1.0 - (1.0 - q) ** (1.0 / (self.m - 0.5)))


def sample_pi(params: ModelParams, rng: RngStream) -> EnergyState:
    """One exact draw from the invariant measure."""
    s = np.empty(params.m + 1)
    _proc._sample_pi_into(s, params.total_energy, rng.state)
    return EnergyState.from_array(s)


def pi_y_cdf(y, params: ModelParams):
    """CDF of the tank energy under the invariant measure: ``I_{y/E}(1/2, m)``."""
    arr = np.asarray(y, dtype=np.float64)
    if np.any(arr < 0) or np.any(arr > params.total_energy) or np.any(np.isnan(arr)):
        raise ValueError(f"y must lie in [0, {params.total_energy}]")
    return PiMarginal.of(params).y_cdf(arr)


def ks_y(y_samples, params: ModelParams) -> tuple[float, float]:
    """KS statistic and p-value of tank-energy samples against the analytic marginal."""
    res = _st.kstest(np.asarray(y_samples), lambda v: pi_y_cdf(np.clip(v, 0, params.total_energy), params))
    return float(res.statistic), float(res.pvalue)


def ks_critical(n: int, level: float = 0.01) -> float:
    """Asymptotic one-sample KS critical value."""
    return float(_st.kstwobign.isf(level) / math.sqrt(n))


def pi_invariance_test(
    params: ModelParams,
    t: float,
    n: int,
    base_seed: int = 0,
    worker_count: int | None = 1,
    initial_sampler="pi",
) -> float:
    """KS distance of the tank marginal after evolving ``n`` starts for time ``t``.

    With the default ``"pi"`` starts the statistic should sit at the pure
    sampling noise floor; any other sampler acts as a control.
    """
    res = run_ensemble(initial_sampler, max(t, 0.0), n, [max(t, 0.0)], base_seed, worker_count, params)
    return ks_y(res.y(0), params)[0]


def uniform_simplex_array(params: ModelParams, n: int, rng: RngStream) -> np.ndarray:
    """Uniform draws on the simplex (a deliberately wrong reference law)."""
    g = -np.log(rng.uniforms(n * (params.m + 1))).reshape(n, params.m + 1)
    return params.total_energy * g / g.sum(axis=1, keepdims=True)


def tail_integral(samples: np.ndarray, delta: float) -> float:
    """Sample mean of ``sum_k x_k**(2 delta - 1) + y**(delta - 1/2)``."""
    x = samples[:, :-1]
    y = samples[:, -1]
    return float(np.mean(np.sum(x ** (2 * delta - 1), axis=1) + y ** (delta - 0.5)))


__all__ = [
    "PiMarginal",
    "betainc",
    "ks_critical",
    "ks_y",
    "pi_invariance_test",
    "pi_y_cdf",
    "sample_pi",
    "sample_pi_array",
    "tail_integral",
    "uniform_simplex_array",
]
