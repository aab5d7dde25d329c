"""Keyed counter-based random streams.

Every draw is a pure function of ``(key, counter)``: the 64-bit output is
``mix(key ^ mix((counter + 1) * GOLDEN))`` where ``mix`` is the SplitMix64
finalizer.  Child keys are produced with a different finalizer (MurmurHash3
``fmix64``) so derived keys and draws never share structure.

Independent runs get distinct root keys from ``(master_seed, run_id)``; the
per-step work of the kernel draws from sub-streams keyed additionally by a
purpose tag, the step index and an element id (cell or particle).  Because
nothing depends on how many draws another element consumed, any partition
of the work over threads reproduces the sequential numbers exactly.
"""

from __future__ import annotations

import numpy as np

from .errors import ParameterError

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
_SM1 = 0xBF58476D1CE4E5B9
_SM2 = 0x94D049BB133111EB
_FM1 = 0xFF51AFD7ED558CCD
_FM2 = 0xC4CEB9FE1A85EC53
_SEED_SALT = 0x5DEECE66D1F3A7B9

# purpose tags for sub-streams used by the gas kernel
INIT = 1
GENERATION = 2
MOTION = 3
GEN_MOTION = 4
COLLISION = 5

_INV53 = 1.0 / 9007199254740992.0  # 2**-53

_U64 = np.uint64


def mix64(z: int) -> int:
    z &= MASK64
    z = ((z ^ (z >> 30)) * _SM1) & MASK64
    z = ((z ^ (z >> 27)) * _SM2) & MASK64
    return z ^ (z >> 31)


def fmix64(z: int) -> int:
    z &= MASK64
    z = ((z ^ (z >> 33)) * _FM1) & MASK64
    z = ((z ^ (z >> 33)) * _FM2) & MASK64
    return z ^ (z >> 33)


def derive(key: int, value: int) -> int:
    """Child key of ``key`` labelled by the non-negative integer ``value``."""
    return fmix64(key ^ mix64(((value + 1) * GOLDEN) & MASK64))


def draw64(key: int, counter: int) -> int:
    return mix64(key ^ mix64(((counter + 1) * GOLDEN) & MASK64))


# -- vectorised forms (numpy uint64 arithmetic wraps modulo 2**64) ----------

def _mix64_v(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> _U64(30))) * _U64(_SM1)
    z = (z ^ (z >> _U64(27))) * _U64(_SM2)
    return z ^ (z >> _U64(31))


def _fmix64_v(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> _U64(33))) * _U64(_FM1)
    z = (z ^ (z >> _U64(33))) * _U64(_FM2)
    return z ^ (z >> _U64(33))


def derive_many(keys, values) -> np.ndarray:
    """Vectorised :func:`derive`; ``keys`` and ``values`` broadcast."""
    k = np.asarray(keys, dtype=np.uint64)
    v = np.asarray(values, dtype=np.uint64)
    with np.errstate(over="ignore"):
        return _fmix64_v(k ^ _mix64_v((v + _U64(1)) * _U64(GOLDEN)))


def uniform_at(keys, counters) -> np.ndarray:
    """Uniform doubles in [0, 1) at the given (key, counter) positions."""
    k = np.asarray(keys, dtype=np.uint64)
    c = np.asarray(counters, dtype=np.uint64)
    with np.errstate(over="ignore"):
        bits = _mix64_v(k ^ _mix64_v((c + _U64(1)) * _U64(GOLDEN)))
    return (bits >> _U64(11)).astype(np.float64) * _INV53


def run_key(master_seed: int, run_id: int) -> int:
    return derive(derive(_SEED_SALT, master_seed & MASK64), run_id)


def step_keys(root: int, purpose: int, step: int, ids) -> np.ndarray:
    """Keys of the ``(purpose, step, id)`` sub-streams for an array of ids."""
    base = derive(derive(root, purpose), step)
    return derive_many(np.uint64(base), ids)


class RngStream:
    """A position in a keyed counter-based sequence.

    Streams are cheap values: :meth:`copy` them freely, but a single instance
    is meant to be advanced by one worker at a time.
    """

    __slots__ = ("key", "counter")

    def __init__(self, key: int, counter: int = 0):
        self.key = key & MASK64
        self.counter = counter

    def __repr__(self):
        return f"RngStream(key=0x{self.key:016x}, counter={self.counter})"

    def __eq__(self, other):
        return isinstance(other, RngStream) and (self.key, self.counter) == (other.key, other.counter)

    def copy(self) -> "RngStream":
        return RngStream(self.key, self.counter)

    def child(self, value: int) -> "RngStream":
        return RngStream(derive(self.key, value))

    def substream(self, cell_id: int, step_index: int, purpose: int = COLLISION) -> "RngStream":
        return substream(self, cell_id, step_index, purpose)

    def uniform(self, size=None):
        n = 1 if size is None else int(np.prod(size))
        out = uniform_at(np.uint64(self.key), np.arange(self.counter, self.counter + n, dtype=np.uint64))
        self.counter += n
        if size is None:
            return float(out[0])
        return out.reshape(size)

    def normal(self, size):
        """Standard normal variates by the Box-Muller transform."""
        n = int(np.prod(size))
        m = (n + 1) // 2
        u = self.uniform(2 * m)
        r = np.sqrt(-2.0 * np.log1p(-u[0::2]))
        theta = 2.0 * np.pi * u[1::2]
        z = np.empty(2 * m)
        z[0::2] = r * np.cos(theta)
        z[1::2] = r * np.sin(theta)
        return z[:n].reshape(size)

    def maxwellian(self, count: int, temperature: float, drift=(0.0, 0.0, 0.0)) -> np.ndarray:
        return sample_maxwellian(self, temperature, drift, count)


def stream_for_run(master_seed: int, run_id: int) -> RngStream:
    if run_id < 0:
        raise ParameterError(f"run_id must be non-negative, got {run_id}")
    return RngStream(run_key(master_seed, run_id))


def substream(stream: RngStream, cell_id: int, step_index: int, purpose: int = COLLISION) -> RngStream:
    """Sub-stream of ``stream`` keyed by ``(purpose, step_index, cell_id)``.

    The parent counter is ignored; sub-streams hang off the parent key.
    """
    return RngStream(derive(derive(derive(stream.key, purpose), step_index), cell_id))


def sample_uniform(stream: RngStream, size=None):
    return stream.uniform(size)


def sample_maxwellian(stream: RngStream, temperature: float, drift=(0.0, 0.0, 0.0), count: int | None = None):
    """Velocity vector(s) from a drifting Maxwellian.

    Components have variance ``temperature`` (units with k/m = 1).
    """
    if not temperature > 0:
        raise ParameterError(f"temperature must be positive, got {temperature}")
    drift = np.asarray(drift, dtype=np.float64)
    if count is None:
        return stream.normal(3) * np.sqrt(temperature) + drift
    return stream.normal((count, 3)) * np.sqrt(temperature) + drift
