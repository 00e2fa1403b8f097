"""Desk-scale experiments shared by the command line and the acceptance suite.

Each function returns plain arrays plus a JSON-ready report dictionary.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .equilibrium import PiMarginal, ks_y, tail_integral
from .kac import KacState, kac_simulate, v1_squared_cdf
from .lyapunov import (
    LyapunovParams,
    RegionLabel,
    boundary_grid,
    classify_region,
    drift_check_Ph,
    fit_c_star,
    generator_V,
    interior_grid,
    lyapunov_V,
)
from .equilibrium import sample_pi
from .process import EnergyState, ModelParams, occupation_integrals, run_ensemble, sample_pi_array
from .rng import RngStream
from .stats import (
    VLevelSet,
    decay_fit,
    first_passage,
    moment_estimate,
    tail_exponent,
    tv_curve,
    tv_noise_floor,
)


def centre_state(params: ModelParams) -> EnergyState:
    """Equal split of the energy over the m particles and the tank."""
    share = params.total_energy / (params.m + 1)
    return EnergyState.from_x(np.full(params.m, share), params.total_energy)


def tail_integral_exact(params: ModelParams, delta: float) -> float:
    """Invariant-measure mean of ``sum x_k**(2 delta - 1) + y**(delta - 1/2)``."""
    E, m = params.total_energy, params.m
    p, q = 2 * delta - 1, delta - 0.5
    lb = math.lgamma
    ex = E**p * math.exp(lb(1 + p) + lb(m + 0.5) - lb(m + 0.5 + p))
    ey = E**q * math.exp(lb(0.5 + q) + lb(m + 0.5) - lb(0.5) - lb(m + 0.5 + q))
    return m * ex + ey


def equilibrium_run(params: ModelParams, n_samples: int, seed: int, workers: int | None = 1,
                    delta: float = 0.125):
    samples = sample_pi_array(params, n_samples, seed, workers)
    marg = PiMarginal.of(params)
    y = samples[:, -1]
    se = float(y.std(ddof=1) / math.sqrt(n_samples))
    ks, p = ks_y(y, params)
    report = {
        "m": params.m,
        "total_energy": params.total_energy,
        "n_samples": n_samples,
        "mean_y": float(y.mean()),
        "mean_y_stderr": se,
        "mean_y_exact": marg.mean_y,
        "mean_y_z": (float(y.mean()) - marg.mean_y) / se,
        "mean_x": [float(v) for v in samples[:, :-1].mean(axis=0)],
        "mean_x_exact": marg.mean_x,
        "var_y": float(y.var(ddof=1)),
        "var_y_exact": marg.var_y,
        "ks_statistic": ks,
        "ks_pvalue": p,
        "tail_delta": delta,
        "tail_integral": tail_integral(samples, delta),
        "tail_integral_exact": tail_integral_exact(params, delta),
    }
    return samples, report


def time_average_y(params: ModelParams, n_events: int, seed: int, n_batches: int = 100) -> tuple[float, float]:
    """Time average of the tank energy along one trajectory started from the invariant law.

    Returns the ratio estimate and its batch-means standard error.
    """
    rng = RngStream(seed, 0)
    start = sample_pi(params, rng)
    dur, integ = occupation_integrals(start, n_events, rng, n_batches)
    iy = integ[:, -1]
    mean = iy.sum() / dur.sum()
    resid = iy - mean * dur
    se = math.sqrt(np.sum(resid**2) / (n_batches * (n_batches - 1))) / dur.mean()
    return float(mean), float(se)


@dataclass
class DecayRun:
    times: np.ndarray
    tv: np.ndarray
    ci_lo: np.ndarray
    ci_hi: np.ndarray
    report: dict


def _fit_or_none(times, tv, law, **kw):
    try:
        return decay_fit(times, tv, law=law, **kw).as_dict()
    except ValueError:
        return None


def summarize_decay(times, tv, noise_floor: float | None, min_points: int = 5) -> dict:
    """Power and exponential fits on every point, plus floor-filtered variants."""
    report = {
        "power": decay_fit(times, tv, law="power", min_points=min_points).as_dict(),
        "exponential": decay_fit(times, tv, law="exponential", min_points=min_points).as_dict(),
        "noise_floor": noise_floor,
    }
    if noise_floor is not None:
        report["power_above_floor"] = _fit_or_none(times, tv, "power", noise_floor=noise_floor, min_points=3)
        report["exponential_above_floor"] = _fit_or_none(times, tv, "exponential", noise_floor=noise_floor,
                                                         min_points=3)
    report["better_law"] = "power" if report["power"]["r2"] > report["exponential"]["r2"] else "exponential"
    return report


def tank_decay(params: ModelParams, initial: EnergyState, times, n: int, seed: int,
               workers: int | None = 1, k_bins: int = 5, marginal: str = "min") -> tuple[DecayRun, object]:
    """TV to equilibrium of the min-particle (or tank) marginal along one ensemble."""
    times = np.asarray(times, dtype=np.float64)
    ens = run_ensemble(initial, float(times[-1]), n, times, seed, workers, params)
    marg = PiMarginal.of(params)
    if marginal == "min":
        sets, cdf = [ens.min_x(j) for j in range(times.size)], marg.min_x_cdf
    elif marginal == "y":
        sets, cdf = [ens.y(j) for j in range(times.size)], marg.y_cdf
    else:
        raise ValueError(f"marginal must be 'min' or 'y', got {marginal!r}")
    tv, lo, hi = tv_curve(sets, cdf, k_bins, seed=seed)
    report = summarize_decay(times, tv, tv_noise_floor(k_bins, n))
    report.update({"model": "tank", "m": params.m, "marginal": marginal, "k_bins": k_bins, "n": n})
    return DecayRun(times, tv, lo, hi, report), ens


def kac_decay(n_particles: int, times, n: int, seed: int, workers: int | None = 1,
              k_bins: int = 5, energy: float = 1.0) -> tuple[DecayRun, object]:
    """TV to equilibrium of ``v_1**2`` for the Kac walk started with all energy on particle 1."""
    times = np.asarray(times, dtype=np.float64)
    v0 = np.zeros(n_particles)
    v0[0] = math.sqrt(energy)
    ens = kac_simulate(KacState(v0), times, n, seed, workers)
    sets = [ens.v1_squared(j) for j in range(times.size)]
    tv, lo, hi = tv_curve(sets, lambda s: v1_squared_cdf(s, n_particles, energy), k_bins, seed=seed)
    report = summarize_decay(times, tv, tv_noise_floor(k_bins, n))
    report.update({"model": "kac", "N": n_particles, "marginal": "v1_squared", "k_bins": k_bins, "n": n})
    return DecayRun(times, tv, lo, hi, report), ens


def high_V_states(params: ModelParams, lp: LyapunovParams) -> list[EnergyState]:
    """Deterministic states in every region with V above ten times the level M."""
    E, m = params.total_energy, params.m
    target = 10.0 * lp.level_M
    c = 4.0 ** (1.0 / (2.0 * lp.alpha))
    out = []
    x_big = target ** (-1.0 / (2.0 * lp.alpha)) / 2.0
    y_big = target ** (-1.0 / lp.alpha) / 2.0
    for x1, y in [
        (x_big, None),                 # Region I: lone small particle, tank ordinary
        (x_big, min(lp.eps1 / 2, 1e3 * x_big)),  # Region II
        (None, y_big),                 # Region III: tank nearly empty
        (y_big * 10 / c, y_big),       # Region III with a small particle too
    ]:
        if x1 is None:
            x = np.full(m, (E - y) / m)
        else:
            yy = (E - x1) / m if y is None else y
            x = np.full(m, x1)
            if m > 1:
                x[1:] = (E - x1 - yy) / (m - 1)
        out.append(EnergyState.from_x(x, E))
    return [s for s in out if lyapunov_V(s, lp.alpha) > target]


def drift_run(params: ModelParams, lp: LyapunovParams, n_per_axis: int = 40, n_mc: int = 10**6,
              seed: int = 0, workers: int | None = 1, n_interior_mc: int = 10**5):
    """Generator drift on a deterministic grid of B, plus Monte Carlo ``P^h V - V`` checks.

    Returns ``(rows, report)``; each row is ``(state, region, V, gen_V, margin)``.
    """
    lp.check_against(params)
    grid = boundary_grid(params, lp, n_per_axis)
    c_star, margins = fit_c_star(grid, lp.alpha)
    rows = []
    for s, mg in zip(grid, margins):
        v = lyapunov_V(s, lp.alpha)
        rows.append((s, classify_region(s, lp).value, v, -mg * v**lp.beta, float(mg)))
    inner = interior_grid(params, lp, max(5, n_per_axis // 2))
    inner_gen = []
    for s in inner:
        g = generator_V(s, lp.alpha)
        v = lyapunov_V(s, lp.alpha)
        inner_gen.append(g)
        rows.append((s, RegionLabel.INTERIOR.value, v, g, float(-g / v**lp.beta)))
    counts = {r.value: 0 for r in RegionLabel}
    for r in rows:
        counts[r[1]] += 1

    mc = []
    for k, s in enumerate(high_V_states(params, lp)):
        est = drift_check_Ph(s, lp, n_mc, seed + k, workers)
        mc.append({
            "state": s.as_array().tolist(),
            "region": classify_region(s, lp).value,
            "V": est.V,
            "mean": est.mean,
            "stderr": est.stderr,
            "ci99": [est.ci_lo, est.ci_hi],
            "c0_point": -est.mean / est.V**lp.beta,
            "c0_lower": est.implied_c0(lp.beta),
        })
    # states of the interior grid nearest the edge of B, where P^h V - V is largest
    corners = [max(inner, key=lambda s: lyapunov_V(s, lp.alpha)), max(inner, key=lambda s: s.y),
               centre_state(params)]
    inner_mc = []
    for k, s in enumerate(corners):
        est = drift_check_Ph(s, lp, n_interior_mc, seed + 1000 + k, workers)
        inner_mc.append({"state": s.as_array().tolist(), "mean": est.mean, "ci99": [est.ci_lo, est.ci_hi]})
    report = {
        "m": params.m,
        "alpha": lp.alpha,
        "beta": lp.beta,
        "eps0": lp.eps0,
        "eps1": lp.eps1,
        "level_M": lp.level_M,
        "h": lp.h,
        "grid_size": len(grid),
        "region_counts": counts,
        "c_star": c_star,
        "c0": min((r["c0_lower"] for r in mc), default=None),
        "monte_carlo": mc,
        "sup_interior_gen_V": float(max(inner_gen)),
        "interior_monte_carlo": inner_mc,
        "sup_interior_Ph_V_minus_V": float(max(r["ci99"][1] for r in inner_mc)),
    }
    return rows, report


def passage_level(params: ModelParams, alpha: float, eps_a: float) -> float:
    """V at the state with one particle at ``eps_a`` and the rest split evenly."""
    E, m = params.total_energy, params.m
    share = (E - eps_a) / m
    x = np.full(m, share)
    x[0] = eps_a
    return lyapunov_V(EnergyState.from_x(x, E), alpha)


def passage_run(params: ModelParams, alpha: float, h: float, eps_a: float, n_trials: int,
                n_small: int, seed: int, workers: int | None = 1, max_steps: int = 10**7,
                orders=(1.75, 3.0), level: float | None = None):
    """Passage times of the time-h chain from stationary starts into ``{V_alpha <= level}``."""
    if level is None:
        level = passage_level(params, alpha, eps_a)
    target = VLevelSet(alpha, level)
    sample = first_passage("pi", target, h, n_trials, seed, max_steps, workers, params)
    small = sample.head(min(n_small, n_trials))
    s_min = 5.0 / (h * math.sqrt(eps_a))
    fit = tail_exponent(sample, s_min)
    moments = {}
    for q in orders:
        a = moment_estimate(small, q, seed=seed)
        b = moment_estimate(sample, q, seed=seed)
        moments[str(q)] = {
            "small": {"n": a.n, "value": a.value, "ci": [a.ci_lo, a.ci_hi]},
            "large": {"n": b.n, "value": b.value, "ci": [b.ci_lo, b.ci_hi]},
            "ratio": b.value / a.value,
        }
    report = {
        "m": params.m,
        "alpha": alpha,
        "h": h,
        "level": level,
        "eps_a": eps_a,
        "n_trials": n_trials,
        "censored_fraction": sample.censored_fraction,
        "tail": fit.as_dict(),
        "moments": moments,
    }
    return sample, report
