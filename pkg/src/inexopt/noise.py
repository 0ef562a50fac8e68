"""Noise schedules, squared-tail sums, the ``t_k`` sequence and the Lyapunov value.

A schedule gives the magnitude ``eta(k)`` of the perturbation injected at
iteration index ``k`` and a direction policy turning it into a vector.
Indices start at ``start_index`` (default 1, so ``C / k**alpha`` is finite).
"""
import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .errors import InvalidArgument, NotSummable

KINDS = ("zero", "power_law", "constant", "explicit")
DIRECTIONS = ("random_sphere", "fixed", "adversarial_positive")

# power-law tail sums are summed exactly up to this horizon
TAIL_HORIZON = 1_000_000
_MAX_HORIZON = 400_000_000
_CHUNK = 4_000_000


@dataclass(frozen=True)
class NoiseSchedule:
    kind: str = "zero"
    C: float = 0.0
    alpha: float = 0.0
    value: float = 0.0
    values: Tuple[float, ...] = ()
    direction: str = "random_sphere"
    seed: Optional[int] = None
    fixed_direction: Optional[Tuple[float, ...]] = None
    start_index: int = 1

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidArgument(f"unknown schedule kind {self.kind!r}")
        if self.direction not in DIRECTIONS:
            raise InvalidArgument(f"unknown direction policy {self.direction!r}")
        if self.kind == "power_law" and not (self.C >= 0 and self.alpha > 0):
            raise InvalidArgument("power_law needs C >= 0 and alpha > 0")
        if self.kind == "constant" and self.value < 0:
            raise InvalidArgument("constant noise magnitude must be nonnegative")
        if self.kind == "explicit" and any(not v >= 0 for v in self.values):
            raise InvalidArgument("explicit magnitudes must be nonnegative")
        if self.direction == "fixed":
            if not self.fixed_direction:
                raise InvalidArgument("fixed direction needs fixed_direction")
            if np.linalg.norm(self.fixed_direction) == 0:
                raise InvalidArgument("fixed_direction must be nonzero")

    @classmethod
    def zero(cls):
        return cls("zero")

    @classmethod
    def power_law(cls, C, alpha, direction="random_sphere", seed=0, **kw):
        return cls("power_law", C=float(C), alpha=float(alpha), direction=direction,
                   seed=seed, **kw)

    @classmethod
    def constant(cls, value, direction="random_sphere", seed=0, **kw):
        return cls("constant", value=float(value), direction=direction, seed=seed, **kw)

    @classmethod
    def explicit(cls, values, direction="random_sphere", seed=0, **kw):
        return cls("explicit", values=tuple(float(v) for v in values), direction=direction,
                   seed=seed, **kw)

    def to_dict(self):
        d = dict(kind=self.kind, direction=self.direction, seed=self.seed,
                 start_index=self.start_index)
        if self.kind == "power_law":
            d.update(C=self.C, alpha=self.alpha)
        elif self.kind == "constant":
            d.update(value=self.value)
        elif self.kind == "explicit":
            d.update(values=list(self.values))
        if self.fixed_direction is not None:
            d["fixed_direction"] = list(self.fixed_direction)
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        if "values" in d:
            d["values"] = tuple(float(v) for v in d["values"])
        if d.get("fixed_direction") is not None:
            d["fixed_direction"] = tuple(float(v) for v in d["fixed_direction"])
        return cls(**d)


@dataclass(frozen=True)
class LyapunovParams:
    theta: float = 2.0
    b: float = 1.0

    def __post_init__(self):
        if not self.theta > 1:
            raise InvalidArgument("theta must be > 1")
        if self.b < 0:
            raise InvalidArgument("b must be nonnegative")


def _check_index(schedule, k):
    if k < schedule.start_index:
        raise InvalidArgument(f"index {k} precedes start_index {schedule.start_index}")


def eta(schedule, k):
    """Noise magnitude at index ``k``."""
    _check_index(schedule, k)
    if schedule.kind == "power_law":
        return schedule.C / k ** schedule.alpha
    if schedule.kind == "constant":
        return schedule.value
    if schedule.kind == "explicit":
        i = k - schedule.start_index
        return schedule.values[i] if i < len(schedule.values) else 0.0
    return 0.0


def etas(schedule, ks):
    return np.array([eta(schedule, int(k)) for k in ks], dtype=float)


def is_summable(schedule):
    """Whether ``sum_k eta(k)`` is finite."""
    if schedule.kind == "power_law":
        return schedule.C == 0 or schedule.alpha > 1
    if schedule.kind == "constant":
        return schedule.value == 0
    return True


def is_square_summable(schedule):
    if schedule.kind == "power_law":
        return schedule.C == 0 or schedule.alpha > 0.5
    if schedule.kind == "constant":
        return schedule.value == 0
    return True


def _power_sq_terms(C, p, lo, hi):
    """``sum_{l=lo}^{hi-1} C^2 / l^p`` summed in chunks from the small end."""
    total = 0.0
    stop = hi
    while stop > lo:
        start = max(lo, stop - _CHUNK)
        ls = np.arange(start, stop, dtype=float)
        total += float(np.sum(C * C / ls ** p))
        stop = start
    return total


def _power_tail(C, alpha, K):
    """``sum_{l>=K} C^2 / l^(2 alpha)`` estimated as integral + half first term.

    The true tail lies in ``[I, I + f(K)]`` so the error is at most ``f(K)/2``.
    """
    p = 2.0 * alpha
    first = C * C / K ** p
    integral = C * C * K ** (1.0 - p) / (p - 1.0)
    return integral + 0.5 * first, 0.5 * first


def _horizon(schedule, k, tolerance):
    p = 2.0 * schedule.alpha
    K = max(k, TAIL_HORIZON)
    # remainder error bound C^2 K^-p / 2 <= tolerance
    need = (schedule.C ** 2 / (2.0 * tolerance)) ** (1.0 / p)
    if need > K:
        K = int(math.ceil(need))
    if K > _MAX_HORIZON:
        raise InvalidArgument("tolerance too tight for this power law; loosen it")
    return K


def tail_sum_sq(schedule, k, tolerance=1e-12):
    """``sum_{l>=k} eta(l)^2``, exact for finite schedules, within ``tolerance`` for power laws."""
    _check_index(schedule, k)
    if not is_square_summable(schedule):
        raise NotSummable(f"{schedule.kind} schedule is not square-summable")
    if schedule.kind == "explicit":
        i = k - schedule.start_index
        return float(sum(v * v for v in schedule.values[i:]))
    if schedule.kind != "power_law" or schedule.C == 0:
        return 0.0
    K = _horizon(schedule, k, tolerance)
    rest, _ = _power_tail(schedule.C, schedule.alpha, K)
    return _power_sq_terms(schedule.C, 2.0 * schedule.alpha, k, K) + rest


def tail_sums_sq(schedule, ks, tolerance=1e-12):
    """Vectorized ``tail_sum_sq`` over sorted-or-not indices ``ks``.

    One certified tail at ``max(ks)`` plus a reverse cumulative sum over the
    few terms below it.
    """
    ks = np.asarray(ks, dtype=int)
    if ks.size == 0:
        return np.zeros(0)
    lo, hi = int(ks.min()), int(ks.max())
    base = tail_sum_sq(schedule, hi, tolerance)
    sq = etas(schedule, range(lo, hi)) ** 2
    # suffix[j] = sum of squares from index lo+j up to hi-1
    suffix = np.concatenate([np.cumsum(sq[::-1])[::-1], [0.0]])
    return base + suffix[ks - lo]


def t_sequence(schedule, params, k, tolerance=1e-12):
    """``t_k = (theta * b * sum_{l>=k} eta_l^2)^(1/theta)``."""
    return (params.theta * params.b * tail_sum_sq(schedule, k, tolerance)) ** (1.0 / params.theta)


def t_values(schedule, params, ks, tolerance=1e-12):
    tails = tail_sums_sq(schedule, ks, tolerance)
    return (params.theta * params.b * tails) ** (1.0 / params.theta)


def xi(F_value, t, theta):
    """Lyapunov value ``F + t^theta / theta``."""
    if not theta > 1:
        raise InvalidArgument("theta must be > 1")
    return F_value + t ** theta / theta


def c_theta(theta):
    """``(2 theta - 1) / (2 (theta - 1))``: power-law exponents above this value suffice."""
    theta = np.asarray(theta, dtype=float)
    if np.any(~(theta > 1)):
        raise InvalidArgument("theta must be > 1")
    out = (2.0 * theta - 1.0) / (2.0 * (theta - 1.0))
    return float(out) if out.ndim == 0 else out


def power_law_tail_bound(C, alpha, theta, k):
    """Integral upper bound on ``(sum_{l>=k} C^2/l^(2 alpha))^((theta-1)/theta)``, for ``k >= 2``."""
    if k < 2:
        raise InvalidArgument("bound needs k >= 2")
    q = (theta - 1.0) / theta
    return (C ** (2.0 * q) / (2.0 * alpha - 1.0) ** q) * (k - 1.0) ** (-(2.0 * alpha - 1.0) * q)


def _direction(schedule, k, dimension, seed):
    if schedule.direction == "adversarial_positive":
        return np.full(dimension, 1.0 / math.sqrt(dimension))
    if schedule.direction == "fixed":
        u = np.asarray(schedule.fixed_direction, dtype=float)
        if u.size != dimension:
            raise InvalidArgument(f"fixed direction has size {u.size}, need {dimension}")
        return u / np.linalg.norm(u)
    if seed is None:
        seed = 0
    v = np.random.default_rng([int(seed), int(k)]).standard_normal(dimension)
    return v / np.linalg.norm(v)


def draw_noise(schedule, k, dimension, seed=None):
    """Noise vector with norm ``eta(k)``; random directions depend only on ``(seed, k)``.

    ``seed`` is used when the schedule carries none.
    """
    if dimension < 1:
        raise InvalidArgument("dimension must be positive")
    m = eta(schedule, k)
    if m == 0.0:
        return np.zeros(dimension)
    s = schedule.seed if schedule.seed is not None else seed
    return m * _direction(schedule, k, dimension, s)
