"""Exact event-driven simulation of the energy-tank jump process.

Particle ``i`` carries an exponential clock of rate ``sqrt(x_i)``.  When it
rings, the particle and the tank exchange energy::

    x_i' = y + (1 - u**2) * x_i,    y' = u**2 * x_i,    u ~ Uniform(0, 1)

Rates only change at jumps, so drawing the superposed holding time
``Exp(sum sqrt(x_i))`` and then the ringing particle is exact.

Kernel-side states are float arrays ``[x_1, ..., x_m, y]``.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence, Union

import numba as nb
import numpy as np

from . import rng as _rng
from .rng import RngStream

CONSERVATION_ULPS = 8

# pending-event slots used by the kernels
_EV_T, _EV_I, _EV_U = 0, 1, 2


@dataclass(frozen=True)
class ModelParams:
    m: int
    total_energy: float = 1.0

    def __post_init__(self):
        if int(self.m) != self.m or self.m < 1:
            raise ValueError(f"m must be a positive integer, got {self.m!r}")
        if not (self.total_energy > 0 and math.isfinite(self.total_energy)):
            raise ValueError(f"total_energy must be positive and finite, got {self.total_energy!r}")
        object.__setattr__(self, "m", int(self.m))
        object.__setattr__(self, "total_energy", float(self.total_energy))

    @property
    def max_total_rate(self) -> float:
        return math.sqrt(self.m * self.total_energy)


@dataclass(frozen=True)
class EnergyState:
    """Particle energies ``x`` and tank energy ``y`` (a point of the open simplex)."""

    x: np.ndarray
    y: float

    def __post_init__(self):
        x = np.array(self.x, dtype=np.float64).reshape(-1)
        x.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", float(self.y))

    @classmethod
    def from_array(cls, arr) -> "EnergyState":
        arr = np.asarray(arr, dtype=np.float64)
        return cls(arr[:-1].copy(), float(arr[-1]))

    @classmethod
    def from_x(cls, x, total_energy: float = 1.0) -> "EnergyState":
        """Build a state whose tank holds whatever the particles do not."""
        x = np.asarray(x, dtype=np.float64)
        return cls(x, total_energy - float(np.sum(x)))

    @property
    def m(self) -> int:
        return self.x.size

    @property
    def total(self) -> float:
        return math.fsum(self.x) + self.y

    def as_array(self) -> np.ndarray:
        return np.append(self.x, self.y)

    def is_valid(self, params: ModelParams) -> bool:
        arr = self.as_array()
        return (
            self.m == params.m
            and bool(np.all(arr > 0))
            and bool(np.all(np.isfinite(arr)))
            and abs(self.total - params.total_energy)
            <= CONSERVATION_ULPS * np.finfo(float).eps * params.total_energy
        )

    def __eq__(self, other):
        if not isinstance(other, EnergyState):
            return NotImplemented
        return np.array_equal(self.x, other.x) and self.y == other.y

    def __hash__(self):
        return hash((self.x.tobytes(), self.y))


@dataclass(frozen=True)
class JumpEvent:
    time: float
    particle: int  # 1-based, as in the CSV export
    u: float


@dataclass
class Trajectory:
    params: ModelParams
    initial: EnergyState
    times: np.ndarray
    particles: np.ndarray  # 0-based indices
    us: np.ndarray
    states: np.ndarray  # post-event states, shape (n_events, m + 1)
    t_end: float
    sample_times: np.ndarray = field(default_factory=lambda: np.empty(0))
    samples: np.ndarray = field(default_factory=lambda: np.empty((0, 0)))

    @property
    def n_events(self) -> int:
        return self.times.size

    @property
    def events(self) -> list[JumpEvent]:
        return [
            JumpEvent(float(t), int(i) + 1, float(u))
            for t, i, u in zip(self.times, self.particles, self.us)
        ]

    def state_at(self, t: float) -> EnergyState:
        """State after every event with time <= t (right-continuous paths)."""
        k = int(np.searchsorted(self.times, t, side="right"))
        if k == 0:
            return self.initial
        return EnergyState.from_array(self.states[k - 1])

    def replay(self) -> np.ndarray:
        """Re-apply the recorded events to the initial state; returns post-event states."""
        out = np.empty_like(self.states)
        s = self.initial.as_array()
        _replay(s, self.params.total_energy, self.particles, self.us, out)
        return out


def check_state(state: EnergyState, params: ModelParams) -> None:
    if state.m != params.m:
        raise ValueError(f"state has {state.m} particles, params expect {params.m}")
    arr = state.as_array()
    if not np.all(np.isfinite(arr)) or np.any(arr <= 0):
        raise ValueError("state must lie in the open simplex (all energies > 0)")
    tol = CONSERVATION_ULPS * np.finfo(float).eps * params.total_energy
    if abs(state.total - params.total_energy) > tol:
        raise ValueError(
            f"energies sum to {state.total!r}, expected {params.total_energy!r} (tolerance {tol:.3g})"
        )


# ---------------------------------------------------------------------------
# kernels


@nb.njit(cache=True)
def _rate(s):
    m = s.size - 1
    r = 0.0
    for k in range(m):
        r += math.sqrt(s[k])
    return r


@nb.njit(cache=True)
def _select(s, rate, v):
    """Particle whose cumulative sqrt-energy first exceeds ``v * rate``."""
    m = s.size - 1
    target = v * rate
    acc = 0.0
    for k in range(m):
        acc += math.sqrt(s[k])
        if target < acc:
            return k
    # v * rate rounded up past the last partial sum
    for k in range(m - 1, -1, -1):
        if s[k] > 0.0:
            return k
    return m - 1


@nb.njit(cache=True)
def _rebalance(s, total):
    """Let the largest coordinate absorb rounding so the sum is exactly ``total``."""
    n = s.size
    kmax = 0
    for k in range(1, n):
        if s[k] > s[kmax]:
            kmax = k
    rest = 0.0
    for k in range(n):
        if k != kmax:
            rest += s[k]
    s[kmax] = total - rest


@nb.njit(cache=True)
def _residual(s, total):
    """``total - sum(s)`` with Neumaier compensation."""
    acc = 0.0
    comp = 0.0
    for k in range(s.size):
        t = acc + s[k]
        if abs(acc) >= abs(s[k]):
            comp += (acc - t) + s[k]
        else:
            comp += (s[k] - t) + acc
        acc = t
    return (total - acc) - comp


_BAND = 2.0 * np.finfo(np.float64).eps


@nb.njit(cache=True)
def _exchange(s, total, i, u):
    m = s.size - 1
    xi = s[i]
    y_new = u * u * xi
    if y_new <= 0.0:
        return False
    s[i] = s[m] + (1.0 - u) * (1.0 + u) * xi
    s[m] = y_new
    # keep the energy sum within a rounding band of total; the larger touched
    # coordinate absorbs the excess, so untouched particles stay bit-exact
    r = _residual(s, total)
    if abs(r) > _BAND * total:
        big = i if s[i] >= s[m] else m
        if r > -0.5 * s[big]:
            s[big] += r
        else:
            _rebalance(s, total)
    return True


@nb.njit(cache=True)
def _draw_u(s, i, state):
    # resample on underflow of u^2 * x_i so the tank stays strictly positive
    while True:
        u = _rng.next_open(state)
        if u * u * s[i] > 0.0:
            return u


@nb.njit(cache=True)
def _draw_event(s, t, state, ev):
    rate = _rate(s)
    ev[_EV_T] = t + _rng.next_exponential(state) / rate
    i = _select(s, rate, _rng.next_double(state))
    ev[_EV_I] = i
    ev[_EV_U] = _draw_u(s, i, state)


@nb.njit(cache=True)
def _advance(s, total, t_stop, state, ev):
    """Apply pending events with time <= t_stop; returns the number applied."""
    n = 0
    while ev[_EV_T] <= t_stop:
        _exchange(s, total, np.int64(ev[_EV_I]), ev[_EV_U])
        _draw_event(s, ev[_EV_T], state, ev)
        n += 1
    return n


@nb.njit(cache=True)
def _record(s, total, t_stop, state, ev, times, parts, us, states, n0):
    """Like ``_advance`` but logs events into preallocated buffers from slot n0."""
    n = n0
    cap = times.size
    while ev[_EV_T] <= t_stop and n < cap:
        i = np.int64(ev[_EV_I])
        _exchange(s, total, i, ev[_EV_U])
        times[n] = ev[_EV_T]
        parts[n] = i
        us[n] = ev[_EV_U]
        states[n, :] = s
        _draw_event(s, ev[_EV_T], state, ev)
        n += 1
    return n


@nb.njit(cache=True)
def _replay(s, total, parts, us, out):
    for n in range(parts.size):
        _exchange(s, total, parts[n], us[n])
        out[n, :] = s


@nb.njit(cache=True)
def _sample_pi_into(s, total, state):
    # Dirichlet(1, ..., 1, 1/2): exponentials for particles, Gamma(1/2) = Z^2/2 for the tank
    m = s.size - 1
    while True:
        z = _rng.next_normal(state)
        g = 0.5 * z * z
        acc = g
        for k in range(m):
            e = _rng.next_exponential(state)
            s[k] = e
            acc += e
        ok = g > 0.0
        for k in range(m):
            s[k] = total * (s[k] / acc)
            ok = ok and s[k] > 0.0
        s[m] = total * (g / acc)
        if ok and s[m] > 0.0:
            _rebalance(s, total)
            return


# initial-condition modes for ensemble kernels
INIT_FIXED, INIT_ARRAY, INIT_PI = 0, 1, 2


@nb.njit(cache=True)
def _init_trajectory(mode, inits, k, total, s, state):
    if mode == INIT_FIXED:
        s[:] = inits[0]
    elif mode == INIT_ARRAY:
        s[:] = inits[k]
    else:
        _sample_pi_into(s, total, state)


@nb.njit(cache=True, nogil=True)
def _ensemble_chunk(mode, inits, total, sample_times, seed, k0, k1, out):
    n_coord = out.shape[2]
    s = np.empty(n_coord)
    state = np.empty(_rng.STATE_SIZE, dtype=np.uint64)
    ev = np.empty(3)
    for k in range(k0, k1):
        _rng.init_state(state, seed, np.uint64(k))
        _init_trajectory(mode, inits, k, total, s, state)
        _draw_event(s, 0.0, state, ev)
        for j in range(sample_times.size):
            _advance(s, total, sample_times[j], state, ev)
            out[k - k0, j, :] = s


@nb.njit(cache=True, nogil=True)
def _first_ring_chunk(mode, inits, total, particle, t_cap, seed, k0, k1, out):
    n_coord = inits.shape[1]
    s = np.empty(n_coord)
    state = np.empty(_rng.STATE_SIZE, dtype=np.uint64)
    ev = np.empty(3)
    for k in range(k0, k1):
        _rng.init_state(state, seed, np.uint64(k))
        _init_trajectory(mode, inits, k, total, s, state)
        _draw_event(s, 0.0, state, ev)
        out[k - k0] = np.inf
        while ev[_EV_T] <= t_cap:
            if np.int64(ev[_EV_I]) == particle:
                out[k - k0] = ev[_EV_T]
                break
            _exchange(s, total, np.int64(ev[_EV_I]), ev[_EV_U])
            _draw_event(s, ev[_EV_T], state, ev)


@nb.njit(cache=True, nogil=True)
def _one_jump_chunk(init, total, seed, k0, k1, out):
    s = np.empty(init.size)
    state = np.empty(_rng.STATE_SIZE, dtype=np.uint64)
    ev = np.empty(3)
    for k in range(k0, k1):
        _rng.init_state(state, seed, np.uint64(k))
        s[:] = init
        _draw_event(s, 0.0, state, ev)
        _exchange(s, total, np.int64(ev[_EV_I]), ev[_EV_U])
        out[k - k0, :] = s


# share of tilted draws in the importance-sampling mixture for u
_TILT = 0.1


@nb.njit(cache=True)
def _draw_tilted(s, t, k_pow, state, ev):
    """Like ``_draw_event`` but u is drawn as ``w**k_pow`` with probability ``_TILT``.

    Returns the likelihood ratio of the uniform law against that mixture,
    which is at most ``1 / (1 - _TILT)``.
    """
    rate = _rate(s)
    ev[_EV_T] = t + _rng.next_exponential(state) / rate
    i = _select(s, rate, _rng.next_double(state))
    ev[_EV_I] = i
    while True:
        pick = _rng.next_double(state)
        u = _rng.next_open(state)
        if pick < _TILT:
            u = u**k_pow
        if u * u * s[i] > 0.0:
            break
    ev[_EV_U] = u
    return 1.0 / (1.0 - _TILT + _TILT * u ** (1.0 / k_pow - 1.0) / k_pow)


@nb.njit(cache=True, nogil=True)
def _tilted_chunk(init, total, t_stop, k_pow, seed, k0, k1, out, weights):
    s = np.empty(init.size)
    state = np.empty(_rng.STATE_SIZE, dtype=np.uint64)
    ev = np.empty(3)
    for k in range(k0, k1):
        _rng.init_state(state, seed, np.uint64(k))
        s[:] = init
        w = _draw_tilted(s, 0.0, k_pow, state, ev)
        acc = 1.0
        while ev[_EV_T] <= t_stop:
            acc *= w
            _exchange(s, total, np.int64(ev[_EV_I]), ev[_EV_U])
            w = _draw_tilted(s, ev[_EV_T], k_pow, state, ev)
        out[k - k0, :] = s
        weights[k - k0] = acc


@nb.njit(cache=True)
def _occupation(s, total, n_events, n_batches, state, durations, integrals):
    """Time integrals of every coordinate over consecutive blocks of events."""
    ev = np.empty(3)
    per = n_events // n_batches
    t = 0.0
    _draw_event(s, t, state, ev)
    for b in range(n_batches):
        for _ in range(per):
            dt = ev[_EV_T] - t
            durations[b] += dt
            for c in range(s.size):
                integrals[b, c] += s[c] * dt
            t = ev[_EV_T]
            _exchange(s, total, np.int64(ev[_EV_I]), ev[_EV_U])
            _draw_event(s, t, state, ev)


# ---------------------------------------------------------------------------
# public operations


def total_rate(state: EnergyState) -> float:
    """Total clock rate ``sum_i sqrt(x_i)`` of the state."""
    return float(np.sum(np.sqrt(state.x)))


def sample_holding_time(state: EnergyState, rng: RngStream) -> float:
    """Exponential holding time by inverse CDF, ``-log(U) / rate`` with U in (0, 1)."""
    return float(-math.log(rng.uniform_open()) / total_rate(state))


def select_particle(state: EnergyState, rng: RngStream) -> int:
    """0-based index of the ringing particle, chosen with probability proportional to sqrt(x_i)."""
    s = state.as_array()
    return int(_select(s, _rate(s), rng.uniform()))


def apply_exchange(state: EnergyState, i: int, u: float, total_energy: float | None = None) -> EnergyState:
    """Particle ``i`` (0-based) exchanges energy with the tank using draw ``u``."""
    if not 0.0 < u < 1.0:
        raise ValueError(f"u must lie strictly inside (0, 1), got {u!r}")
    if not 0 <= i < state.m:
        raise IndexError(f"particle index {i} out of range for m={state.m}")
    total = state.total if total_energy is None else float(total_energy)
    s = state.as_array()
    if not _exchange(s, total, int(i), float(u)):
        raise ValueError(f"u**2 * x_i underflows to 0 for u={u!r}; draw a new u")
    return EnergyState.from_array(s)


def step(state: EnergyState, rng: RngStream, t: float = 0.0, total_energy: float | None = None):
    """One jump: returns ``(dt, JumpEvent, new_state)``.

    Pass ``total_energy`` when chaining many steps so conservation is
    enforced against the nominal total rather than the current sum.
    """
    s = state.as_array()
    ev = np.empty(3)
    _draw_event(s, float(t), rng.state, ev)
    total = state.total if total_energy is None else float(total_energy)
    i = int(ev[_EV_I])
    _exchange(s, total, i, ev[_EV_U])
    return float(ev[_EV_T] - t), JumpEvent(float(ev[_EV_T]), i + 1, float(ev[_EV_U])), EnergyState.from_array(s)


def simulate(
    initial: EnergyState,
    t_end: float,
    rng: RngStream,
    sample_times: Sequence[float] | None = None,
    params: ModelParams | None = None,
) -> Trajectory:
    """Every event in ``[0, t_end]`` plus states at the requested sample times."""
    if not t_end > 0:
        raise ValueError(f"t_end must be positive, got {t_end!r}")
    if params is None:
        params = ModelParams(initial.m, initial.total)
    check_state(initial, params)
    total = params.total_energy
    s = initial.as_array()
    ev = np.empty(3)
    _draw_event(s, 0.0, rng.state, ev)

    cap = 1024
    times = np.empty(cap)
    parts = np.empty(cap, dtype=np.int64)
    us = np.empty(cap)
    states = np.empty((cap, params.m + 1))
    n = 0
    while True:
        n = _record(s, total, t_end, rng.state, ev, times, parts, us, states, n)
        if n < times.size:
            break
        cap *= 2
        times = np.resize(times, cap)
        parts = np.resize(parts, cap)
        us = np.resize(us, cap)
        states = np.resize(states, (cap, params.m + 1))

    traj = Trajectory(params, initial, times[:n].copy(), parts[:n].copy(), us[:n].copy(), states[:n].copy(), float(t_end))
    if sample_times is not None:
        st = np.asarray(sample_times, dtype=np.float64)
        if st.size and (np.any(np.diff(st) < 0) or st[0] < 0):
            raise ValueError("sample_times must be sorted and non-negative")
        idx = np.searchsorted(traj.times, st, side="right")
        samples = np.empty((st.size, params.m + 1))
        init = initial.as_array()
        for j, k in enumerate(idx):
            samples[j] = init if k == 0 else traj.states[k - 1]
        traj.sample_times = st
        traj.samples = samples
    return traj


InitialSampler = Union[EnergyState, np.ndarray, str]


def _resolve_initial(initial_sampler: InitialSampler, params: ModelParams, n: int):
    if isinstance(initial_sampler, str):
        if initial_sampler != "pi":
            raise ValueError(f"unknown initial sampler {initial_sampler!r}; use 'pi', a state or an array")
        return INIT_PI, np.zeros((1, params.m + 1))
    if isinstance(initial_sampler, EnergyState):
        check_state(initial_sampler, params)
        return INIT_FIXED, initial_sampler.as_array()[None, :]
    inits = np.ascontiguousarray(initial_sampler, dtype=np.float64)
    if inits.shape != (n, params.m + 1):
        raise ValueError(f"initial array must have shape {(n, params.m + 1)}, got {inits.shape}")
    if np.any(inits <= 0):
        raise ValueError("initial states must lie in the open simplex")
    return INIT_ARRAY, inits


def resolve_workers(worker_count: int | None) -> int:
    if worker_count is None:
        worker_count = int(os.environ.get("TANKMIX_WORKERS", "1"))
    if worker_count < 1:
        raise ValueError(f"worker_count must be >= 1, got {worker_count}")
    return int(worker_count)


def chunked(n: int, workers: int, fn: Callable[[int, int], None]) -> None:
    """Run ``fn(k0, k1)`` over a fixed partition of ``range(n)``.

    The partition depends only on ``n``, and each trajectory owns its stream,
    so results do not depend on ``workers``.
    """
    size = max(1, min(65536, -(-n // 64)))
    bounds = [(k, min(n, k + size)) for k in range(0, n, size)]
    if workers == 1:
        for k0, k1 in bounds:
            fn(k0, k1)
        return
    with ThreadPoolExecutor(max_workers=workers) as pool:
        list(pool.map(lambda b: fn(*b), bounds))


@dataclass
class EnsembleResult:
    params: ModelParams
    sample_times: np.ndarray
    states: np.ndarray  # (n_trajectories, n_times, m + 1)
    base_seed: int

    def at(self, j: int) -> np.ndarray:
        return self.states[:, j, :]

    def y(self, j: int) -> np.ndarray:
        return self.states[:, j, -1]

    def min_x(self, j: int) -> np.ndarray:
        return self.states[:, j, :-1].min(axis=1)


def run_ensemble(
    initial_sampler: InitialSampler,
    t_end: float,
    n_trajectories: int,
    sample_times: Sequence[float] | None = None,
    base_seed: int = 0,
    worker_count: int | None = 1,
    params: ModelParams | None = None,
) -> EnsembleResult:
    """Independent trajectories, trajectory ``k`` on stream ``(base_seed, k)``.

    ``initial_sampler`` is a fixed :class:`EnergyState`, an array of
    ``n_trajectories`` initial states, or ``"pi"`` to draw each start from the
    invariant measure on the trajectory's own stream.
    """
    if n_trajectories < 1:
        raise ValueError("n_trajectories must be >= 1")
    if params is None:
        if isinstance(initial_sampler, EnergyState):
            params = ModelParams(initial_sampler.m, initial_sampler.total)
        else:
            raise ValueError("params are required unless the initial sampler is a single state")
    times = np.asarray([t_end] if sample_times is None else sample_times, dtype=np.float64)
    if np.any(np.diff(times) < 0) or times[0] < 0 or times[-1] > t_end:
        raise ValueError("sample_times must be sorted inside [0, t_end]")
    mode, inits = _resolve_initial(initial_sampler, params, n_trajectories)
    out = np.empty((n_trajectories, times.size, params.m + 1))
    seed = np.uint64(base_seed)
    total = params.total_energy

    def work(k0, k1):
        _ensemble_chunk(mode, inits, total, times, seed, k0, k1, out[k0:k1])

    chunked(n_trajectories, resolve_workers(worker_count), work)
    return EnsembleResult(params, times, out, int(base_seed))


def first_ring_times(
    initial_sampler: InitialSampler,
    particle: int,
    t_cap: float,
    n_trajectories: int,
    base_seed: int = 0,
    worker_count: int | None = 1,
    params: ModelParams | None = None,
) -> np.ndarray:
    """Time of the first event of ``particle`` (0-based) per trajectory; inf if none by ``t_cap``."""
    if params is None:
        params = ModelParams(initial_sampler.m, initial_sampler.total)
    mode, inits = _resolve_initial(initial_sampler, params, n_trajectories)
    out = np.empty(n_trajectories)
    seed = np.uint64(base_seed)

    def work(k0, k1):
        _first_ring_chunk(mode, inits, params.total_energy, int(particle), float(t_cap), seed, k0, k1, out[k0:k1])

    chunked(n_trajectories, resolve_workers(worker_count), work)
    return out


def occupation_integrals(initial: EnergyState, n_events: int, rng: RngStream, n_batches: int = 100):
    """Durations and per-coordinate time integrals over ``n_batches`` blocks of events.

    Returns ``(durations, integrals)`` with shapes ``(n_batches,)`` and
    ``(n_batches, m + 1)``; the last block-boundary event is consumed but
    not integrated past.
    """
    if n_events < n_batches:
        raise ValueError("need at least one event per batch")
    s = initial.as_array()
    durations = np.zeros(n_batches)
    integrals = np.zeros((n_batches, s.size))
    _occupation(s, initial.total, int(n_events), int(n_batches), rng.state, durations, integrals)
    return durations, integrals


def one_jump_states(initial: EnergyState, n: int, base_seed: int = 0, worker_count: int | None = 1) -> np.ndarray:
    """States right after the first jump of ``n`` independent copies started at ``initial``."""
    init = initial.as_array()
    out = np.empty((n, init.size))
    seed = np.uint64(base_seed)
    total = initial.total

    def work(k0, k1):
        _one_jump_chunk(init, total, seed, k0, k1, out[k0:k1])

    chunked(n, resolve_workers(worker_count), work)
    return out


def tilted_states(initial: EnergyState, t_end: float, n: int, k_pow: float, base_seed: int = 0,
                  worker_count: int | None = 1) -> tuple[np.ndarray, np.ndarray]:
    """States at ``t_end`` with importance-sampled exchange fractions, plus path weights.

    Each u is drawn from a mixture of the uniform law (weight 0.9) and the law
    of ``w**k_pow`` with w uniform (weight 0.1), which puts more mass near
    u = 0.  The returned
    weights are likelihood ratios with mean 1, so ``mean(weights * g(states))``
    is unbiased for ``E[g(x_t)]``.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if not k_pow >= 1.0:
        raise ValueError(f"k_pow must be >= 1, got {k_pow!r}")
    init = initial.as_array()
    out = np.empty((n, init.size))
    weights = np.empty(n)
    seed = np.uint64(base_seed)
    total = initial.total

    def work(k0, k1):
        _tilted_chunk(init, total, float(t_end), float(k_pow), seed, k0, k1, out[k0:k1], weights[k0:k1])

    chunked(n, resolve_workers(worker_count), work)
    return out, weights


def sample_pi_array(params: ModelParams, n: int, base_seed: int = 0, worker_count: int | None = 1) -> np.ndarray:
    """``n`` exact draws from the invariant measure, draw ``k`` on stream ``(base_seed, k)``."""
    res = run_ensemble("pi", 0.0, n, [0.0], base_seed, worker_count, params)
    return res.states[:, 0, :]
