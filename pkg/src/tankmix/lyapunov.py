"""Lyapunov function ``V_a = sum x_i**(-2a) + y**(-a)`` and its jump drift.

For particle ``i`` the expected change of ``V`` per unit time due to its own
clock is::

    Q_i = sqrt(x_i) * ( int_0^1 (x_i (1 - u^2) + y)^(-2a) du
                        + x_i^(-a) / (1 - 2a) - x_i^(-2a) - y^(-a) )

and the generator applied to ``V`` is ``sum_i Q_i``.  The ``u^-2a`` part is
integrated in closed form; the remaining integrand is smooth for ``y > 0``
and goes to adaptive Gauss-Kronrod.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from .process import EnergyState, ModelParams, one_jump_states, run_ensemble, tilted_states
from .quadrature import gauss_kronrod
from .rng import RngStream

QUAD_REL_TOL = 1e-9


class RegionLabel(str, Enum):
    I = "I"
    II = "II"
    III = "III"
    INTERIOR = "Interior"


def beta_of(alpha: float) -> float:
    return 1.0 - 1.0 / (4.0 * alpha)


def _check_alpha(alpha: float, lo: float = 0.0) -> None:
    if not lo < alpha < 0.5:
        raise ValueError(f"alpha must lie in ({lo}, 1/2), got {alpha!r}")


@dataclass(frozen=True)
class LyapunovParams:
    alpha: float
    eps0: float
    eps1: float
    level_M: float
    h: float

    def __post_init__(self):
        if not 0.25 < self.alpha < 0.5:
            raise ValueError(f"alpha must lie in (1/4, 1/2), got {self.alpha!r}")
        if not 0 < self.eps0 < self.particle_scale * self.eps1:
            raise ValueError(
                f"need 0 < eps0 < 4**(-1/(2 alpha)) * eps1 = {self.particle_scale * self.eps1:.6g}, got eps0={self.eps0!r}"
            )
        if not (self.level_M > 0 and self.h > 0):
            raise ValueError("level_M and h must be positive")

    @property
    def beta(self) -> float:
        return beta_of(self.alpha)

    @property
    def particle_scale(self) -> float:
        """``4**(-1/(2 alpha))``: the particle threshold of B is this times eps0."""
        return 4.0 ** (-1.0 / (2.0 * self.alpha))

    @classmethod
    def default(cls, params: ModelParams, alpha: float = 0.45, eps1: float | None = None,
                eps0: float | None = None, h: float | None = None) -> "LyapunovParams":
        E, m = params.total_energy, params.m
        if eps1 is None:
            eps1 = E / (40.0 * m)
        if eps0 is None:
            eps0 = eps1 * 4.0 ** (-1.0 / (2.0 * alpha)) / 10.0
        if h is None:
            h = 0.5 / math.sqrt(m * E)
        level = 2.0 * sup_V_outside_B(params, alpha, eps0)
        return cls(alpha, eps0, eps1, level, h)

    def check_against(self, params: ModelParams) -> None:
        if not self.eps1 < params.total_energy / (2 * params.m):
            raise ValueError(f"eps1 must be below E/(2m) = {params.total_energy / (2 * params.m):.6g}")
        if not self.h <= 0.5 / params.max_total_rate:
            raise ValueError(f"h must be <= 0.5/sqrt(m E) = {0.5 / params.max_total_rate:.6g}")


def lyapunov_V(state: EnergyState, alpha: float) -> float:
    if state.y <= 0 or np.any(state.x <= 0):
        raise ValueError("V is only defined on the open simplex")
    return float(np.sum(state.x ** (-2.0 * alpha)) + state.y ** (-alpha))


def lyapunov_V_array(states: np.ndarray, alpha: float) -> np.ndarray:
    """V for an array of ``[x_1..x_m, y]`` rows."""
    states = np.asarray(states, dtype=np.float64)
    return np.sum(states[..., :-1] ** (-2.0 * alpha), axis=-1) + states[..., -1] ** (-alpha)


def C1(alpha: float) -> float:
    """``int_0^1 (1-u^2)^(-2 alpha) du = B(1/2, 1 - 2 alpha) / 2``."""
    _check_alpha(alpha)
    lb = math.lgamma(0.5) + math.lgamma(1.0 - 2.0 * alpha) - math.lgamma(1.5 - 2.0 * alpha)
    return 0.5 * math.exp(lb)


def C2(alpha: float) -> float:
    """``int_0^1 u^(-2 alpha) du = 1 / (1 - 2 alpha)``."""
    _check_alpha(alpha)
    return 1.0 / (1.0 - 2.0 * alpha)


def _smooth_integral(x: float, y: float, alpha: float) -> float:
    p = -2.0 * alpha
    f = lambda u: (x * (1.0 - u) * (1.0 + u) + y) ** p
    bps = None
    r = y / (2.0 * x)
    if r < 1e-3:
        # the integrand turns over where x (1 - u^2) ~ y; seed breakpoints on that scale
        k = np.arange(0, int(math.log(0.5 / r) / math.log(8.0)) + 1)
        bps = 1.0 - r * 8.0 ** k
    return gauss_kronrod(f, 0.0, 1.0, rel_tol=QUAD_REL_TOL, breakpoints=bps)[0]


def Q_parts(state: EnergyState, i: int, alpha: float) -> tuple[float, float]:
    """Split of ``Q_i`` into the particle-term and tank-term drifts."""
    _check_alpha(alpha)
    x = float(state.x[i])
    y = state.y
    if x <= 0 or y <= 0:
        raise ValueError("Q_i is only defined on the open simplex")
    s = math.sqrt(x)
    particle = s * (_smooth_integral(x, y, alpha) - x ** (-2.0 * alpha))
    tank = s * (x ** (-alpha) / (1.0 - 2.0 * alpha) - y ** (-alpha))
    return particle, tank


def Q_i(state: EnergyState, i: int, alpha: float) -> float:
    """Drift contribution of particle ``i`` (0-based)."""
    a, b = Q_parts(state, i, alpha)
    return a + b


def Q_upper_bound(state: EnergyState, i: int, alpha: float) -> float:
    x = float(state.x[i])
    y = state.y
    c1, c2 = C1(alpha), C2(alpha)
    return math.sqrt(x) * (
        min(c1 * x ** (-2 * alpha), y ** (-2 * alpha)) + c2 * x ** (-alpha) - x ** (-2 * alpha) - y ** (-alpha)
    )


def generator_V(state: EnergyState, alpha: float) -> float:
    return float(sum(Q_i(state, i, alpha) for i in range(state.m)))


def Q_i_monte_carlo(state: EnergyState, i: int, alpha: float, n: int, rng: RngStream):
    """Monte Carlo estimate of ``sqrt(x_i) (E_u[V after exchange] - V)`` and its standard error.

    ``u = w**k`` with ``w`` uniform and likelihood weight ``k w**(k-1)``,
    ``k = 2/(1 - 2 alpha)``: this keeps the ``u^(-2 alpha)`` tank term
    bounded, which plain uniform draws do not (their variance is infinite).
    """
    k = 2.0 / (1.0 - 2.0 * alpha)
    w = rng.uniforms(n)
    u = w**k
    weight = k * w ** (k - 1.0)
    x = float(state.x[i])
    y = state.y
    x_new = y + (1.0 - u) * (1.0 + u) * x
    # y_new = u^2 x written through w so it cannot underflow
    tank = x ** (-alpha) * w ** (-2.0 * alpha * k)
    v_after_i = x_new ** (-2.0 * alpha) + tank
    vals = math.sqrt(x) * (weight * v_after_i - (x ** (-2.0 * alpha) + y ** (-alpha)))
    return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(n))


def sup_V_outside_B(params: ModelParams, alpha: float, eps0: float) -> float:
    """Max of V over ``{y >= eps0, x_i >= 4**(-1/(2 alpha)) eps0}``.

    V is convex, so the maximum sits at a vertex of that polytope.
    """
    E, m = params.total_energy, params.m
    d = 4.0 ** (-1.0 / (2.0 * alpha)) * eps0
    if m * d + eps0 >= E:
        raise ValueError("eps0 too large: the complement of B is empty")
    vertices = [np.append(np.full(m, d), E - m * d)]
    big = np.full(m, d)
    big[0] = E - eps0 - (m - 1) * d
    vertices.append(np.append(big, eps0))
    return float(max(lyapunov_V_array(v, alpha) for v in vertices))


def in_B(state: EnergyState, lp: LyapunovParams) -> bool:
    c = 4.0 ** (1.0 / (2.0 * lp.alpha))
    return bool(c * state.x.min() < lp.eps0 or state.y < lp.eps0)


def classify_region(state: EnergyState, lp: LyapunovParams) -> RegionLabel:
    """Region of the boundary neighbourhood, tested with strict inequalities in order I, II, III."""
    c = 4.0 ** (1.0 / (2.0 * lp.alpha))
    cx = c * float(state.x.min())
    y = state.y
    if cx < lp.eps0 and y >= lp.eps1:
        return RegionLabel.I
    if cx < lp.eps0 and cx < y < lp.eps1:
        return RegionLabel.II
    if cx >= y and y < lp.eps0:
        return RegionLabel.III
    return RegionLabel.INTERIOR


def drift_margin(state: EnergyState, alpha: float) -> float:
    """``-sum Q_i / V**beta``: the constant c* implied at this state."""
    return -generator_V(state, alpha) / lyapunov_V(state, alpha) ** beta_of(alpha)


def drift_check_one_jump(state: EnergyState, lp: LyapunovParams) -> float:
    """Implied c* of the one-jump inequality; positive means it holds here."""
    if classify_region(state, lp) is RegionLabel.INTERIOR:
        raise ValueError("one-jump drift is only claimed on the boundary set B")
    return drift_margin(state, lp.alpha)


def expected_V_after_jump(state: EnergyState, alpha: float) -> float:
    from .process import total_rate

    return lyapunov_V(state, alpha) + generator_V(state, alpha) / total_rate(state)


@dataclass(frozen=True)
class DriftEstimate:
    V: float
    mean: float  # estimate of E[V(x_h)] - V(x)
    stderr: float
    ci_lo: float
    ci_hi: float
    n: int

    def implied_c0(self, beta: float) -> float:
        """Largest c0 with ``ci_hi <= -c0 V**beta`` (negative if the bound fails)."""
        return -self.ci_hi / self.V**beta


def drift_check_Ph(state: EnergyState, lp: LyapunovParams, n_mc: int, base_seed: int = 0,
                   worker_count: int | None = 1, z: float = 2.5758293035489,
                   importance: bool = True) -> DriftEstimate:
    """Monte Carlo estimate of ``P^h V - V`` at one state with a normal-theory CI (99% by default).

    Plain simulation gives ``V(x_h)`` infinite variance for alpha above 1/4,
    because the tank term ``(u^2 x)^(-alpha)`` has tail index ``1 / (2 alpha)``,
    so the CI is not trustworthy.  With ``importance`` the exchange fractions
    are drawn from a law with extra mass near zero (see :func:`tilted_states`)
    and reweighted, which keeps the estimator unbiased with finite variance
    for every alpha below 1/2.
    """
    params = ModelParams(state.m, state.total)
    lp.check_against(params)
    v0 = lyapunov_V(state, lp.alpha)
    if importance:
        states, w = tilted_states(state, lp.h, n_mc, 2.0 / (1.0 - 2.0 * lp.alpha), base_seed, worker_count)
        dv = w * (lyapunov_V_array(states, lp.alpha) - v0)
    else:
        res = run_ensemble(state, lp.h, n_mc, [lp.h], base_seed, worker_count, params)
        dv = lyapunov_V_array(res.at(0), lp.alpha) - v0
    mean = float(dv.mean())
    se = float(dv.std(ddof=1) / math.sqrt(n_mc))
    return DriftEstimate(v0, mean, se, mean - z * se, mean + z * se, n_mc)


def one_jump_mean_V(state: EnergyState, alpha: float, n: int, base_seed: int = 0,
                    worker_count: int | None = 1) -> tuple[float, float]:
    """Mean and standard error of V right after the first jump, by direct simulation."""
    after = one_jump_states(state, n, base_seed, worker_count)
    v = lyapunov_V_array(after, alpha)
    return float(v.mean()), float(v.std(ddof=1) / math.sqrt(n))


def boundary_grid(params: ModelParams, lp: LyapunovParams, n_per_axis: int = 40) -> list[EnergyState]:
    """Deterministic log-spaced states covering Regions I, II and III.

    The smallest particle and the tank sweep log-spaced values from far
    inside each region up to its edge; remaining energy is split evenly over
    the other particles.
    """
    E, m = params.total_energy, params.m
    c = 4.0 ** (1.0 / (2.0 * lp.alpha))
    xmins = np.geomspace(1e-10 * E, lp.eps0 / c, n_per_axis, endpoint=False)
    ys = np.concatenate([
        np.geomspace(1e-12 * E, lp.eps1, n_per_axis, endpoint=False),
        np.geomspace(lp.eps1, 0.9 * E, n_per_axis // 2),
    ])
    out = []
    for x1 in xmins:
        for y in ys:
            _append_state(out, x1, y, E, m)
    # Region III: tank below eps0 with the smallest particle above y / c
    for y in np.geomspace(1e-12 * E, lp.eps0, n_per_axis, endpoint=False):
        for x1 in np.geomspace(y / c, E / (m + 1), n_per_axis):
            _append_state(out, x1, y, E, m)
    return [s for s in out if classify_region(s, lp) is not RegionLabel.INTERIOR]


def interior_grid(params: ModelParams, lp: LyapunovParams, n_per_axis: int = 25) -> list[EnergyState]:
    """Deterministic states of the complement of B, including its corners."""
    E, m = params.total_energy, params.m
    d = lp.particle_scale * lp.eps0
    out = []
    for x1 in np.geomspace(d, E / m, n_per_axis):
        for y in np.geomspace(lp.eps0, E - m * d, n_per_axis):
            _append_state(out, x1, y, E, m)
    return [s for s in out if classify_region(s, lp) is RegionLabel.INTERIOR]


def _append_state(out, x1, y, E, m):
    rest = E - x1 - y
    if m == 1:
        if abs(rest) > 1e-15 * E or y <= 0:
            x = np.array([E - y])
        else:
            x = np.array([x1])
        if x[0] <= 0:
            return
        out.append(EnergyState.from_x(x, E))
        return
    if rest <= 0:
        return
    share = rest / (m - 1)
    if share < x1:
        return
    x = np.full(m, share)
    x[0] = x1
    st = EnergyState.from_x(x, E)
    if st.y > 0:
        out.append(st)


def fit_c_star(states, alpha: float) -> tuple[float, np.ndarray]:
    """Largest c* with ``G V <= -c* V**beta`` on all given states, and the per-state margins."""
    margins = np.array([drift_margin(s, alpha) for s in states])
    return float(margins.min()), margins
