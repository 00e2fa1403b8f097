"""Kac's binary-collision walk: the exponentially mixing baseline.

A clock of rate N rings; a uniformly chosen unordered pair ``(i, j)`` is
rotated by a uniform angle, which preserves ``sum v**2``.  The equilibrium is
the uniform law on the sphere, under which ``v_1**2 / E ~ Beta(1/2, (N-1)/2)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba as nb
import numpy as np

from . import rng as _rng
from .equilibrium import betainc
from .process import chunked, resolve_workers
from .rng import RngStream


@dataclass(frozen=True)
class KacState:
    v: np.ndarray

    def __post_init__(self):
        v = np.array(self.v, dtype=np.float64).reshape(-1)
        if v.size < 2:
            raise ValueError("the Kac walk needs at least two particles")
        v.setflags(write=False)
        object.__setattr__(self, "v", v)

    @property
    def n(self) -> int:
        return self.v.size

    @property
    def energy(self) -> float:
        return math.fsum(self.v**2)


@nb.njit(cache=True)
def _renormalize(v, energy):
    acc = 0.0
    for k in range(v.size):
        acc += v[k] * v[k]
    scale = math.sqrt(energy / acc)
    for k in range(v.size):
        v[k] *= scale


@nb.njit(cache=True)
def _rotate(v, i, j, theta, energy):
    c = math.cos(theta)
    s = math.sin(theta)
    vi = v[i]
    vj = v[j]
    v[i] = c * vi - s * vj
    v[j] = s * vi + c * vj
    _renormalize(v, energy)


@nb.njit(cache=True)
def _draw_pair(n, state):
    i = _rng.next_index(state, n)
    j = _rng.next_index(state, n - 1)
    if j >= i:
        j += 1
    return i, j


@nb.njit(cache=True)
def _kac_event(v, energy, state):
    i, j = _draw_pair(v.size, state)
    theta = 2.0 * math.pi * _rng.next_double(state)
    _rotate(v, i, j, theta, energy)


@nb.njit(cache=True, nogil=True)
def _kac_chunk(init, energy, sample_times, seed, k0, k1, out, counts):
    n = init.size
    v = np.empty(n)
    state = np.empty(_rng.STATE_SIZE, dtype=np.uint64)
    for k in range(k0, k1):
        _rng.init_state(state, seed, np.uint64(k))
        v[:] = init
        t = _rng.next_exponential(state) / n
        events = 0
        for j in range(sample_times.size):
            while t <= sample_times[j]:
                _kac_event(v, energy, state)
                events += 1
                t += _rng.next_exponential(state) / n
            out[k - k0, j, :] = v
            counts[k - k0, j] = events


def kac_step(state: KacState, rng: RngStream) -> KacState:
    """One collision (pair and angle drawn from ``rng``)."""
    v = state.v.copy()
    _kac_event(v, state.energy, rng.state)
    return KacState(v)


def kac_rotate(state: KacState, i: int, j: int, theta: float) -> KacState:
    """Deterministic rotation of the pair ``(i, j)`` by ``theta``."""
    if i == j:
        raise ValueError("a collision needs two distinct particles")
    v = state.v.copy()
    _rotate(v, int(i), int(j), float(theta), state.energy)
    return KacState(v)


@dataclass
class KacEnsemble:
    sample_times: np.ndarray
    states: np.ndarray  # (n_trajectories, n_times, N)
    event_counts: np.ndarray  # (n_trajectories, n_times)

    def v1_squared(self, j: int) -> np.ndarray:
        return self.states[:, j, 0] ** 2


def kac_simulate(initial: KacState, sample_times, n_trajectories: int = 1, base_seed: int = 0,
                 worker_count: int | None = 1) -> KacEnsemble:
    """Continuous-time Kac walk (holding times Exp(N)) sampled at sorted times."""
    times = np.asarray(sample_times, dtype=np.float64)
    if np.any(np.diff(times) < 0) or times[0] < 0:
        raise ValueError("sample_times must be sorted and non-negative")
    n = initial.n
    out = np.empty((n_trajectories, times.size, n))
    counts = np.empty((n_trajectories, times.size), dtype=np.int64)
    init = initial.v.copy()
    energy = initial.energy
    seed = np.uint64(base_seed)

    def work(k0, k1):
        _kac_chunk(init, energy, times, seed, k0, k1, out[k0:k1], counts[k0:k1])

    chunked(n_trajectories, resolve_workers(worker_count), work)
    return KacEnsemble(times, out, counts)


def sphere_sample(n: int, energy: float, size: int, rng: RngStream) -> np.ndarray:
    """Uniform points on ``{sum v^2 = energy}`` via normalized Gaussian vectors."""
    z = np.array([rng.normal() for _ in range(size * n)]).reshape(size, n)
    return z * np.sqrt(energy / np.sum(z**2, axis=1, keepdims=True))


def v1_squared_cdf(s, n: int, energy: float):
    """Equilibrium CDF of ``v_1**2``."""
    return betainc(0.5, (n - 1) / 2.0, np.clip(np.asarray(s, dtype=np.float64) / energy, 0.0, 1.0))


def v1_cdf(v, n: int, energy: float):
    """Equilibrium CDF of the signed coordinate ``v_1``."""
    v = np.asarray(v, dtype=np.float64)
    half = 0.5 * v1_squared_cdf(v**2, n, energy)
    return np.where(v >= 0, 0.5 + half, 0.5 - half)
