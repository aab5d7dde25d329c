"""Closed-form speedup and efficiency model.

Single level (Amdahl): ``Tp = ((1 - a) + a/p) T1``, ``Sp = p / (p - a(p - 1))``,
``Ep = Sp / p``, and ``Sp -> 1/(1 - a)`` as ``p`` grows.

Two levels: the speedups multiply, ``Sp = Sp1 * Sp2``.

Dynamic reallocation: after the second level the sequential fraction of a
run becomes ``b* = b / (b + (1 - b)/p2)``; with over-allocation ``pri``
the second-level speedup is ``1 / (b + (1 - b)/(p2 (1 + pri)))`` and the
useful limit of ``pri`` is ``b/(1 - b) (p2 - 1)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import ParameterError


class Unbounded:
    """Tagged result for a quantity with no finite value."""

    _inst = None

    def __new__(cls):
        if cls._inst is None:
            cls._inst = super().__new__(cls)
        return cls._inst

    def __repr__(self):
        return "UNBOUNDED"

    __str__ = __repr__

    def __bool__(self):
        return False


UNBOUNDED = Unbounded()


def _frac(name, x):
    if not (isinstance(x, (int, float)) and 0.0 <= x <= 1.0):
        raise ParameterError(f"{name} must lie in [0, 1], got {x!r}")
    return float(x)


def _count(name, p):
    if not (isinstance(p, (int, float)) and p >= 1 and math.isfinite(p)):
        raise ParameterError(f"{name} must be >= 1, got {p!r}")
    return p


def _nonneg(name, x):
    if not (isinstance(x, (int, float)) and x >= 0 and math.isfinite(x)):
        raise ParameterError(f"{name} must be >= 0, got {x!r}")
    return float(x)


def parallel_time(t1: float, alpha: float, p) -> float:
    if not t1 > 0:
        raise ParameterError(f"t1 must be positive, got {t1!r}")
    a = _frac("alpha", alpha)
    p = _count("p", p)
    return ((1.0 - a) + a / p) * t1


def amdahl_speedup(alpha: float, p) -> float:
    a = _frac("alpha", alpha)
    p = _count("p", p)
    return p / (p - a * (p - 1))


def amdahl_efficiency(alpha: float, p) -> float:
    a = _frac("alpha", alpha)
    p = _count("p", p)
    return 1.0 / ((1.0 - a) * p + a)


def speedup_limit(alpha: float):
    """``1/(1 - alpha)``; :data:`UNBOUNDED` at ``alpha == 1``."""
    a = _frac("alpha", alpha)
    if a == 1.0:
        return UNBOUNDED
    return 1.0 / (1.0 - a)


def tlp_speedup(alpha1: float, alpha2: float, p1, p2) -> float:
    return amdahl_speedup(alpha1, p1) * amdahl_speedup(alpha2, p2)


def tlp_efficiency(alpha1: float, alpha2: float, p1, p2) -> float:
    return tlp_speedup(alpha1, alpha2, p1, p2) / (p1 * p2)


def beta_star(beta: float, p2) -> float:
    b = _frac("beta", beta)
    p2 = _count("p2", p2)
    if b == 0.0:
        return 0.0
    return b / (b + (1.0 - b) / p2)


def s_p2_with_pri(beta: float, p2, pri: float) -> float:
    b = _frac("beta", beta)
    p2 = _count("p2", p2)
    pri = _nonneg("pri", pri)
    return 1.0 / (b + (1.0 - b) / (p2 * (1.0 + pri)))


def pri_star(beta: float, p2):
    b = _frac("beta", beta)
    p2 = _count("p2", p2)
    if b == 1.0:
        return UNBOUNDED
    return b / (1.0 - b) * (p2 - 1)


def pri_condition_check(beta: float, p, p1, p2, pri: float):
    """Imbalance between the idle workers spread over all leaders and the
    team a leader requests: ``1 + (p - p1)/((1 - b*) p1) - (1 + pri) p2``.

    Zero means the requested team exactly absorbs the idle pool.
    """
    p = _count("p", p)
    p1 = _count("p1", p1)
    pri = _nonneg("pri", pri)
    bs = beta_star(beta, p2)
    if bs == 1.0:
        return UNBOUNDED
    return 1.0 + (p - p1) / ((1.0 - bs) * p1) - (1.0 + pri) * p2


def max_second_level_speedup(beta: float):
    b = _frac("beta", beta)
    return UNBOUNDED if b == 0.0 else 1.0 / b


def estimate_alpha(profile) -> float:
    """Parallel share of a timing profile.

    ``profile`` maps ``"parallel"`` and ``"serial"`` to a duration or a
    sequence of durations.
    """
    if not profile:
        raise ParameterError("empty timing profile")

    def total(key):
        v = profile.get(key, 0.0)
        vals = [v] if isinstance(v, (int, float)) else list(v)
        if any(x < 0 for x in vals):
            raise ParameterError(f"negative duration in {key!r}")
        return float(sum(vals)), len(vals)

    par, npar = total("parallel")
    ser, nser = total("serial")
    if "parallel" not in profile or "serial" not in profile or npar == 0 or nser == 0:
        raise ParameterError("profile needs at least one serial and one parallel duration")
    if par + ser == 0:
        raise ParameterError("profile has zero total duration")
    return par / (par + ser)


@dataclass(frozen=True)
class PerfParams:
    """Model inputs.  ``beta`` is stored; ``alpha`` is derived."""

    beta: float
    p: int = 1
    p1: int = 1
    p2: int = 1
    pri: float = 0.0

    def __post_init__(self):
        _frac("beta", self.beta)
        for name in ("p", "p1", "p2"):
            _count(name, getattr(self, name))
        _nonneg("pri", self.pri)

    @classmethod
    def from_alpha(cls, alpha: float, **kw) -> "PerfParams":
        return cls(1.0 - _frac("alpha", alpha), **kw)

    @property
    def alpha(self) -> float:
        return 1.0 - self.beta


@dataclass(frozen=True)
class Metrics:
    t1: float | None = None
    tp: float | None = None
    sp: float | None = None
    ep: float | None = None

    @classmethod
    def from_times(cls, t1: float, tp: float, p) -> "Metrics":
        if not (t1 > 0 and tp > 0):
            raise ParameterError("times must be positive")
        sp = t1 / tp
        return cls(t1, tp, sp, sp / p)

    @classmethod
    def predicted(cls, alpha: float, p, t1: float | None = None) -> "Metrics":
        tp = parallel_time(t1, alpha, p) if t1 is not None else None
        return cls(t1, tp, amdahl_speedup(alpha, p), amdahl_efficiency(alpha, p))
