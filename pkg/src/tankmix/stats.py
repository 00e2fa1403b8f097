"""Estimators for relaxation experiments.

Total-variation distances are computed between binned one-dimensional
marginals.  Binning is a measurable map, so a binned TV never exceeds the
TV of the underlying laws.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numba as nb
import numpy as np
from scipy import stats as _st

from . import process as _proc
from . import rng as _rng
from .equilibrium import PiMarginal
from .lyapunov import lyapunov_V_array
from .process import EnergyState, ModelParams, chunked, resolve_workers
from .rng import RngStream


# ---------------------------------------------------------------------------
# total variation


@dataclass(frozen=True)
class EmpiricalDist:
    edges: np.ndarray
    counts: np.ndarray
    total: int

    def __post_init__(self):
        edges = np.asarray(self.edges, dtype=np.float64)
        counts = np.asarray(self.counts, dtype=np.int64)
        if edges.ndim != 1 or edges.size < 2 or np.any(np.diff(edges) <= 0):
            raise ValueError("bin edges must be strictly increasing")
        if counts.size != edges.size - 1:
            raise ValueError("need one count per bin")
        if counts.sum() != self.total:
            raise ValueError("counts must sum to the total sample count")
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "counts", counts)

    @classmethod
    def from_samples(cls, samples, edges) -> "EmpiricalDist":
        """Histogram with the outer edges widened to cover every sample."""
        samples = np.asarray(samples, dtype=np.float64)
        edges = np.array(edges, dtype=np.float64)
        k = np.clip(np.searchsorted(edges, samples, side="right") - 1, 0, edges.size - 2)
        counts = np.bincount(k, minlength=edges.size - 1)
        return cls(edges, counts, int(samples.size))

    @property
    def probabilities(self) -> np.ndarray:
        return self.counts / self.total


def tv_between(dist_a: EmpiricalDist, dist_b: EmpiricalDist) -> float:
    if dist_a.edges.shape != dist_b.edges.shape or not np.array_equal(dist_a.edges, dist_b.edges):
        raise ValueError("distributions must share identical bin edges")
    return float(0.5 * np.abs(dist_a.probabilities - dist_b.probabilities).sum())


def tv_to_cdf(samples, cdf: Callable, k_bins: int) -> float:
    """Binned TV against a continuous law, ``k_bins`` bins of equal reference mass."""
    if k_bins < 2:
        raise ValueError("need at least two bins")
    u = np.asarray(cdf(np.asarray(samples, dtype=np.float64)), dtype=np.float64)
    idx = np.minimum((u * k_bins).astype(np.int64), k_bins - 1)
    p = np.bincount(idx, minlength=k_bins) / u.size
    return float(0.5 * np.abs(p - 1.0 / k_bins).sum())


def tv_to_pi(y_samples, params: ModelParams, k_bins: int = 20) -> float:
    """Binned TV of tank-energy samples to the invariant tank marginal."""
    return tv_to_cdf(y_samples, PiMarginal.of(params).y_cdf, k_bins)


def tv_min_to_pi(min_x_samples, params: ModelParams, k_bins: int = 5) -> float:
    """Binned TV of min-particle-energy samples to its invariant marginal."""
    return tv_to_cdf(min_x_samples, PiMarginal.of(params).min_x_cdf, k_bins)


def tv_noise_floor(k_bins: int, n: int) -> float:
    """Expected binned TV of ``n`` exact draws against their own law (equal-mass bins, normal approximation)."""
    return math.sqrt(k_bins * (1.0 - 1.0 / k_bins) / (2.0 * math.pi * n))


def tv_curve(sample_sets, cdf: Callable, k_bins: int, n_boot: int = 200, seed: int = 0,
             level: float = 0.95) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Binned TV for each sample set, with a multinomial bootstrap band.

    Returns ``(tv, ci_lo, ci_hi)``.  The bootstrap redraws bin counts from the
    observed frequencies.  Binned TV is biased upward near its noise floor, so
    the band is the spread of the bootstrap quantiles around their median,
    re-centred on the point estimate and clipped at zero.
    """
    gen = np.random.Generator(np.random.Philox(key=[seed, 1]))
    a = (1.0 - level) / 2.0
    tv, lo, hi = [], [], []
    for samples in sample_sets:
        u = np.asarray(cdf(np.asarray(samples, dtype=np.float64)), dtype=np.float64)
        idx = np.minimum((u * k_bins).astype(np.int64), k_bins - 1)
        counts = np.bincount(idx, minlength=k_bins)
        n = int(counts.sum())
        p = counts / n
        tv.append(0.5 * np.abs(p - 1.0 / k_bins).sum())
        boot = gen.multinomial(n, p, size=n_boot) / n
        bt = 0.5 * np.abs(boot - 1.0 / k_bins).sum(axis=1)
        q_lo, med, q_hi = np.quantile(bt, [a, 0.5, 1.0 - a])
        lo.append(max(0.0, tv[-1] - (med - q_lo)))
        hi.append(tv[-1] + (q_hi - med))
    return np.array(tv), np.array(lo), np.array(hi)


# ---------------------------------------------------------------------------
# decay fits


@dataclass(frozen=True)
class DecayFit:
    law: str
    exponent: float  # power-law exponent, or exponential rate
    amplitude: float
    window: tuple[float, float]
    r2: float
    n_points: int

    def predict(self, t):
        t = np.asarray(t, dtype=np.float64)
        if self.law == "power":
            return self.amplitude * t ** (-self.exponent)
        return self.amplitude * np.exp(-self.exponent * t)

    def as_dict(self) -> dict:
        return {
            "law": self.law,
            "exponent": self.exponent,
            "amplitude": self.amplitude,
            "r2": self.r2,
            "window": list(self.window),
            "n_points": self.n_points,
        }


def decay_fit(times, tv_values, window: tuple[float, float] | None = None, law: str = "power",
              noise_floor: float | None = None, floor_factor: float = 3.0, min_points: int = 5) -> DecayFit:
    """Least squares of ``log TV`` on ``log t`` (power) or on ``t`` (exponential).

    Points outside ``window`` and, when ``noise_floor`` is given, points
    below ``floor_factor * noise_floor`` are dropped before fitting.
    """
    t = np.asarray(times, dtype=np.float64)
    v = np.asarray(tv_values, dtype=np.float64)
    if law not in ("power", "exponential"):
        raise ValueError(f"law must be 'power' or 'exponential', got {law!r}")
    keep = (v > 0) & (t > 0)
    if window is not None:
        keep &= (t >= window[0]) & (t <= window[1])
    if noise_floor is not None:
        keep &= v >= floor_factor * noise_floor
    if keep.sum() < min_points:
        raise ValueError(f"degenerate window: {int(keep.sum())} usable points, need {min_points}")
    t, v = t[keep], v[keep]
    xs = np.log(t) if law == "power" else t
    ys = np.log(v)
    slope, intercept = np.polyfit(xs, ys, 1)
    resid = ys - (slope * xs + intercept)
    ss_tot = np.sum((ys - ys.mean()) ** 2)
    r2 = 1.0 - np.sum(resid**2) / ss_tot if ss_tot > 0 else 1.0
    return DecayFit(law, float(-slope), float(math.exp(intercept)), (float(t[0]), float(t[-1])),
                    float(min(max(r2, 0.0), 1.0)), int(t.size))


# ---------------------------------------------------------------------------
# correlations and CLT


def autocovariance(series, max_lag: int) -> np.ndarray:
    """Biased autocovariance estimator for lags ``0..max_lag``."""
    x = np.asarray(series, dtype=np.float64)
    n = x.size
    if max_lag >= n:
        raise ValueError("max_lag must be smaller than the series length")
    d = x - x.mean()
    nfft = 1 << int(math.ceil(math.log2(2 * n)))
    f = np.fft.rfft(d, nfft)
    acov = np.fft.irfft(f * np.conj(f), nfft)[: max_lag + 1] / n
    return acov


def correlation_decay_fit(series, delta: float, mean_holding_time: float, max_lag: int = 1000,
                          floor_factor: float = 3.0) -> DecayFit:
    """Power-law fit of the autocovariance of a sampled series.

    Lags below five mean holding times are transient and dropped; the window
    ends at the first lag whose covariance falls under ``floor_factor`` times
    the standard error ``c(0)/sqrt(n)``.
    """
    x = np.asarray(series, dtype=np.float64)
    ac = autocovariance(x, min(max_lag, x.size - 1))
    floor = floor_factor * ac[0] / math.sqrt(x.size)
    lags = np.arange(ac.size)
    lo = max(1, int(math.ceil(5.0 * mean_holding_time / delta)))
    below = np.flatnonzero((ac <= floor) & (lags >= lo))
    hi = below[0] if below.size else ac.size
    return decay_fit(lags[lo:hi], ac[lo:hi], law="power")


@dataclass(frozen=True)
class BatchMeansResult:
    sigma2: float
    mean: float
    standardized: np.ndarray
    normality_stat: float
    normality_p: float
    batch_size: int

    def ci_halfwidth(self, n: int, z: float = 1.959963984540054) -> float:
        return z * math.sqrt(self.sigma2 / n)


def clt_batch_means(series, batch_count: int) -> BatchMeansResult:
    """Batch-means estimate of the asymptotic variance plus a Shapiro-Wilk test of the batch means."""
    x = np.asarray(series, dtype=np.float64)
    if batch_count < 20:
        raise ValueError("need at least 20 batches")
    b = x.size // batch_count
    if b < 1:
        raise ValueError("series shorter than the batch count")
    means = x[: b * batch_count].reshape(batch_count, b).mean(axis=1)
    grand = means.mean()
    var_means = means.var(ddof=1)
    sigma2 = b * var_means
    std = (means - grand) / math.sqrt(var_means) if var_means > 0 else np.zeros_like(means)
    w, p = _st.shapiro(std)
    return BatchMeansResult(float(sigma2), float(grand), std, float(w), float(p), b)


# ---------------------------------------------------------------------------
# first passage


@dataclass(frozen=True)
class ActiveSet:
    """States with every particle energy and the tank energy at least ``epsilon``."""

    epsilon: float

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")

    def contains(self, state: EnergyState) -> bool:
        return bool(np.all(state.x >= self.epsilon) and state.y >= self.epsilon)


@dataclass(frozen=True)
class VLevelSet:
    """Sublevel set ``{V_alpha <= level}``."""

    alpha: float
    level: float

    def contains(self, state: EnergyState) -> bool:
        return bool(lyapunov_V_array(state.as_array(), self.alpha) <= self.level)


@dataclass
class PassageSample:
    steps: np.ndarray
    censored: np.ndarray
    h: float

    def __post_init__(self):
        self.steps = np.asarray(self.steps, dtype=np.int64)
        self.censored = np.asarray(self.censored, dtype=bool)
        if self.steps.size and self.steps.min() < 1:
            raise ValueError("passage times count steps n > 0")

    @property
    def n(self) -> int:
        return self.steps.size

    @property
    def censored_fraction(self) -> float:
        return float(self.censored.mean()) if self.n else 0.0

    def head(self, n: int) -> "PassageSample":
        return PassageSample(self.steps[:n], self.censored[:n], self.h)


_TARGET_ACTIVE, _TARGET_VLEVEL = 0, 1


@nb.njit(cache=True)
def _in_target(s, kind, eps, alpha, level):
    if kind == _TARGET_ACTIVE:
        for k in range(s.size):
            if s[k] < eps:
                return False
        return True
    m = s.size - 1
    v = s[m] ** (-alpha)
    for k in range(m):
        v += s[k] ** (-2.0 * alpha)
    return v <= level


@nb.njit(cache=True, nogil=True)
def _passage_chunk(mode, inits, total, kind, eps, alpha, level, h, max_steps, seed, k0, k1, steps, cens):
    s = np.empty(inits.shape[1])
    state = np.empty(_rng.STATE_SIZE, dtype=np.uint64)
    ev = np.empty(3)
    for k in range(k0, k1):
        _rng.init_state(state, seed, np.uint64(k))
        _proc._init_trajectory(mode, inits, k, total, s, state)
        _proc._draw_event(s, 0.0, state, ev)
        n = np.int64(0)
        steps[k - k0] = max_steps
        cens[k - k0] = True
        while True:
            n += 1
            if n > max_steps:
                break
            t_grid = n * h
            if ev[0] > t_grid:
                if _in_target(s, kind, eps, alpha, level):
                    steps[k - k0] = n
                    cens[k - k0] = False
                    break
                # state frozen until the next event: jump to the grid point just before it
                n_star = np.int64(math.ceil(ev[0] / h))
                while n_star * h < ev[0]:
                    n_star += 1
                while n_star > 1 and (n_star - 1) * h >= ev[0]:
                    n_star -= 1
                if n_star - 1 > n:
                    n = n_star - 1
                continue
            _proc._advance(s, total, t_grid, state, ev)
            if _in_target(s, kind, eps, alpha, level):
                steps[k - k0] = n
                cens[k - k0] = False
                break


def first_passage(initial_sampler, target, h: float, n_trials: int, base_seed: int = 0,
                  max_steps: int = 10**7, worker_count: int | None = 1,
                  params: ModelParams | None = None) -> PassageSample:
    """First strictly positive step ``n`` with ``x_{n h}`` in ``target``.

    Trials still outside the target after ``max_steps`` steps are returned
    with ``steps = max_steps`` and flagged as censored.
    """
    if params is None:
        params = ModelParams(initial_sampler.m, initial_sampler.total)
    if not h > 0:
        raise ValueError("h must be positive")
    if isinstance(target, ActiveSet):
        kind, eps, alpha, level = _TARGET_ACTIVE, target.epsilon, 0.0, 0.0
    elif isinstance(target, VLevelSet):
        kind, eps, alpha, level = _TARGET_VLEVEL, 0.0, target.alpha, target.level
    else:
        raise TypeError(f"unsupported target {target!r}")
    mode, inits = _proc._resolve_initial(initial_sampler, params, n_trials)
    steps = np.empty(n_trials, dtype=np.int64)
    cens = np.empty(n_trials, dtype=np.bool_)
    seed = np.uint64(base_seed)

    def work(k0, k1):
        _passage_chunk(mode, inits, params.total_energy, kind, float(eps), float(alpha), float(level),
                       float(h), np.int64(max_steps), seed, k0, k1, steps[k0:k1], cens[k0:k1])

    chunked(n_trials, resolve_workers(worker_count), work)
    return PassageSample(steps, cens, float(h))


@dataclass(frozen=True)
class MomentEstimate:
    order: float
    value: float
    ci_lo: float
    ci_hi: float
    n: int


def moment_estimate(sample: PassageSample, order: float, n_boot: int = 200, seed: int = 0,
                    level: float = 0.95, max_censored: float = 0.01) -> MomentEstimate:
    """Empirical ``E[tau**order]`` with a percentile bootstrap interval."""
    if not order > 0:
        raise ValueError("order must be positive")
    if sample.censored_fraction >= max_censored:
        raise ValueError(f"censored fraction {sample.censored_fraction:.3g} too large for a moment estimate")
    vals = sample.steps.astype(np.float64) ** order
    value = float(vals.mean())
    gen = np.random.Generator(np.random.Philox(key=[seed, 0]))
    boots = np.empty(n_boot)
    for b in range(n_boot):
        boots[b] = vals[gen.integers(0, vals.size, vals.size)].mean()
    a = (1.0 - level) / 2.0
    lo, hi = np.quantile(boots, [a, 1.0 - a])
    return MomentEstimate(float(order), value, float(lo), float(hi), sample.n)


def survival_curve(sample: PassageSample, points: Sequence[float] | None = None, n_points: int = 30):
    """Empirical ``P[tau > s]`` at log-spaced ``s`` (or the given points)."""
    steps = np.sort(sample.steps)
    if points is None:
        points = np.unique(np.geomspace(1, max(2, steps[-1]), n_points).astype(np.int64))
    s = np.asarray(points, dtype=np.float64)
    surv = 1.0 - np.searchsorted(steps, s, side="right") / steps.size
    return s, surv


def tail_exponent(sample: PassageSample, s_min: float, min_count: int = 20, n_points: int = 40) -> DecayFit:
    """Power-law fit of the empirical survival function on ``[s_min, s_max]``.

    ``s_max`` is the largest level still exceeded by ``min_count`` trials.
    """
    steps = np.sort(sample.steps)
    if steps.size <= min_count:
        raise ValueError("sample too small for a tail fit")
    s_max = float(steps[-min_count])
    if not s_max > s_min:
        raise ValueError(f"no resolvable tail above s_min={s_min}")
    pts = np.geomspace(s_min, s_max, n_points)
    s, surv = survival_curve(sample, pts)
    return decay_fit(s, surv, law="power", min_points=5)


# ---------------------------------------------------------------------------
# frozen particle


@dataclass(frozen=True)
class FrozenResult:
    t: float
    analytic: float
    simulated: float
    stderr: float
    n: int


def frozen_lower_bound(t: float, params: ModelParams, n: int = 10**5, base_seed: int = 0,
                       worker_count: int | None = 1, initial: EnergyState | None = None) -> FrozenResult:
    """Probability that particle 1 with energy ``t**-2`` has no event before ``t``.

    The analytic value ``exp(-sqrt(x_1) t)`` is exactly ``1/e``; the other
    particles share the remaining energy with the tank.
    """
    if not t > 0:
        raise ValueError("t must be positive")
    x1 = t**-2
    if initial is None:
        E, m = params.total_energy, params.m
        rest = (E - x1) / m
        initial = EnergyState.from_x(np.r_[x1, np.full(m - 1, rest)], E)
    analytic = math.exp(-math.sqrt(initial.x[0]) * t)
    times = _proc.first_ring_times(initial, 0, t, n, base_seed, worker_count, params)
    p = float(np.mean(times > t))
    return FrozenResult(float(t), analytic, p, math.sqrt(analytic * (1 - analytic) / n), n)


def pi_mass_below(samples_min_x: np.ndarray, eps: float) -> float:
    return float(np.mean(samples_min_x < eps))


# ---------------------------------------------------------------------------
# stationary time series


@nb.njit(cache=True)
def _sampled_chain(s, total, delta, n_steps, state, out):
    ev = np.empty(3)
    _proc._draw_event(s, 0.0, state, ev)
    out[0, :] = s
    for k in range(1, n_steps + 1):
        _proc._advance(s, total, k * delta, state, ev)
        out[k, :] = s


def sampled_chain(initial, delta: float, n_steps: int, rng: RngStream,
                  params: ModelParams | None = None) -> np.ndarray:
    """States ``x_0, x_delta, ..., x_{n delta}`` of one trajectory.

    ``initial="pi"`` draws the start from the invariant measure on ``rng``.
    """
    if isinstance(initial, str):
        if initial != "pi" or params is None:
            raise ValueError("use initial='pi' together with params")
        s = np.empty(params.m + 1)
        _proc._sample_pi_into(s, params.total_energy, rng.state)
        total = params.total_energy
    else:
        s = initial.as_array()
        total = initial.total
    out = np.empty((n_steps + 1, s.size))
    _sampled_chain(s, total, float(delta), int(n_steps), rng.state, out)
    return out
