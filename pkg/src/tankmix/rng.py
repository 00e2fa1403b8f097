"""Counter-based random streams (Philox4x64-10) usable from numba kernels.

A stream is keyed by ``(seed, stream_id)``; the block counter starts at zero,
so a key pair fully determines the sequence.  The raw output matches
``numpy.random.Philox(key=[seed, stream_id])`` word for word.

Kernel-side state is a ``uint64[8]`` array laid out as
``[key0, key1, counter, buffer_pos, buf0, buf1, buf2, buf3]``.
"""

from __future__ import annotations

import math

import numba as nb
import numpy as np

_M0 = np.uint64(0xD2E7470EE14C6C93)
_M1 = np.uint64(0xCA5A826395121157)
_W0 = np.uint64(0x9E3779B97F4A7C15)
_W1 = np.uint64(0xBB67AE8584CAA73B)
_MASK32 = np.uint64(0xFFFFFFFF)
_S32 = np.uint64(32)
_S11 = np.uint64(11)
_ONE = np.uint64(1)
_ZERO = np.uint64(0)
_BUFFER_SIZE = 4
_TO_DOUBLE = 1.0 / 9007199254740992.0

STATE_SIZE = 8


@nb.njit(cache=True, inline="always")
def _mulhilo(a, b):
    a_lo = a & _MASK32
    a_hi = a >> _S32
    b_lo = b & _MASK32
    b_hi = b >> _S32
    lo_lo = a_lo * b_lo
    hi_lo = a_hi * b_lo
    lo_hi = a_lo * b_hi
    hi_hi = a_hi * b_hi
    cross = (lo_lo >> _S32) + (hi_lo & _MASK32) + lo_hi
    hi = hi_hi + (hi_lo >> _S32) + (cross >> _S32)
    lo = (cross << _S32) | (lo_lo & _MASK32)
    return hi, lo


@nb.njit(cache=True)
def _refill(state):
    # one Philox4x64-10 block at counter = (state[2], 0, 0, 0)
    c0 = state[2]
    c1 = _ZERO
    c2 = _ZERO
    c3 = _ZERO
    k0 = state[0]
    k1 = state[1]
    for r in range(10):
        if r > 0:
            k0 = k0 + _W0
            k1 = k1 + _W1
        hi0, lo0 = _mulhilo(_M0, c0)
        hi1, lo1 = _mulhilo(_M1, c2)
        c0, c1, c2, c3 = hi1 ^ c1 ^ k0, lo1, hi0 ^ c3 ^ k1, lo0
    state[4] = c0
    state[5] = c1
    state[6] = c2
    state[7] = c3
    state[3] = _ZERO


@nb.njit(cache=True)
def next_uint64(state):
    if state[3] >= _BUFFER_SIZE:
        state[2] = state[2] + _ONE
        _refill(state)
    pos = state[3]
    state[3] = pos + _ONE
    return state[4 + np.int64(pos)]


@nb.njit(cache=True)
def next_double(state):
    """Uniform on [0, 1) with 53 random bits."""
    return np.float64(next_uint64(state) >> _S11) * _TO_DOUBLE


@nb.njit(cache=True)
def next_open(state):
    """Uniform on the open interval (0, 1); exact zeros are redrawn."""
    while True:
        u = next_double(state)
        if u > 0.0:
            return u


@nb.njit(cache=True)
def next_exponential(state):
    return -math.log(next_open(state))


@nb.njit(cache=True)
def next_normal(state):
    # Box-Muller, one variate per call so the draw count stays fixed
    u1 = next_open(state)
    u2 = next_double(state)
    return math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)


@nb.njit(cache=True)
def next_index(state, n):
    """Uniform integer in ``0..n-1``."""
    k = np.int64(next_double(state) * n)
    return k if k < n else n - 1


@nb.njit(cache=True)
def init_state(state, seed, stream_id):
    state[0] = seed
    state[1] = stream_id
    state[2] = _ZERO
    state[3] = np.uint64(_BUFFER_SIZE)


def _as_u64(value: int, name: str) -> np.uint64:
    if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
        raise TypeError(f"{name} must be an integer, got {value!r}")
    value = int(value)
    if not 0 <= value < 2**64:
        raise ValueError(f"{name} must fit in an unsigned 64-bit integer, got {value}")
    return np.uint64(value)


class RngStream:
    """A reproducible random stream identified by ``(seed, stream_id)``.

    Distinct ``stream_id`` values under the same seed give independent
    sequences, so trajectory ``k`` of an ensemble can always use stream ``k``
    regardless of how work is scheduled.
    """

    def __init__(self, seed: int, stream_id: int = 0):
        self.seed = int(_as_u64(seed, "seed"))
        self.stream_id = int(_as_u64(stream_id, "stream_id"))
        self.state = np.zeros(STATE_SIZE, dtype=np.uint64)
        init_state(self.state, np.uint64(self.seed), np.uint64(self.stream_id))

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed}, stream_id={self.stream_id})"

    def spawn(self, stream_id: int) -> "RngStream":
        return RngStream(self.seed, stream_id)

    def uint64(self) -> int:
        return int(next_uint64(self.state))

    def uniform(self) -> float:
        return float(next_double(self.state))

    def uniform_open(self) -> float:
        return float(next_open(self.state))

    def exponential(self) -> float:
        return float(next_exponential(self.state))

    def normal(self) -> float:
        return float(next_normal(self.state))

    def uniforms(self, n: int) -> np.ndarray:
        return _fill_open(self.state, int(n))


@nb.njit(cache=True)
def _fill_open(state, n):
    out = np.empty(n)
    for k in range(n):
        out[k] = next_open(state)
    return out
