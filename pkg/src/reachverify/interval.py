"""Outward-rounded interval arithmetic.

All primitives work on pairs of numpy arrays ``(lo, hi)`` so a whole batch of
boxes can be pushed through an expression tree in one pass.  Every result is
widened by at least one ULP in the outward direction, so enclosures stay valid
in exact arithmetic and not only in round-to-nearest floating point.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

_INF = np.inf
# libm exp/log are not correctly rounded; widen transcendental results by a few ULPs
_TRANSCENDENTAL_ULPS = 4.0


class IntervalError(ArithmeticError):
    """An interval operation left the domain of finite real intervals."""


def down(x):
    return np.nextafter(x, -_INF)


def up(x):
    return np.nextafter(x, _INF)


def _check_finite(lo, hi, what: str):
    if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
        raise IntervalError(f"non-finite bound produced by {what}")


def iadd(alo, ahi, blo, bhi):
    return down(alo + blo), up(ahi + bhi)


def isub(alo, ahi, blo, bhi):
    return down(alo - bhi), up(ahi - blo)


def ineg(alo, ahi):
    return -ahi, -alo


def imul(alo, ahi, blo, bhi):
    p1 = alo * blo
    p2 = alo * bhi
    p3 = ahi * blo
    p4 = ahi * bhi
    lo = np.minimum(np.minimum(p1, p2), np.minimum(p3, p4))
    hi = np.maximum(np.maximum(p1, p2), np.maximum(p3, p4))
    return down(lo), up(hi)


def contains_zero(lo, hi):
    return (lo <= 0.0) & (hi >= 0.0)


def idiv(alo, ahi, blo, bhi):
    """Interval quotient; the caller must make sure ``[blo, bhi]`` excludes 0."""
    q1 = alo / blo
    q2 = alo / bhi
    q3 = ahi / blo
    q4 = ahi / bhi
    lo = np.minimum(np.minimum(q1, q2), np.minimum(q3, q4))
    hi = np.maximum(np.maximum(q1, q2), np.maximum(q3, q4))
    return down(lo), up(hi)


def _pow_chain_down(a, p):
    # a >= 0; each partial product rounded toward -inf keeps a valid lower bound
    r = a
    for _ in range(p - 1):
        r = down(r * a)
    return r


def _pow_chain_up(a, p):
    r = a
    for _ in range(p - 1):
        r = up(r * a)
    return r


def ipow(alo, ahi, p: int):
    """Integer power by repeated multiplication, with even/odd handling."""
    if p == 0:
        one = np.ones_like(np.asarray(alo, dtype=float))
        return one, one.copy()
    if p < 0:
        plo, phi = ipow(alo, ahi, -p)
        one = np.ones_like(plo)
        return idiv(one, one, plo, phi)
    if p == 1:
        return alo, ahi
    alo = np.asarray(alo, dtype=float)
    ahi = np.asarray(ahi, dtype=float)
    if p % 2 == 1:
        lo = np.where(alo >= 0, _pow_chain_down(np.abs(alo), p), -_pow_chain_up(np.abs(alo), p))
        hi = np.where(ahi >= 0, _pow_chain_up(np.abs(ahi), p), -_pow_chain_down(np.abs(ahi), p))
        return lo, hi
    mag_hi = np.maximum(np.abs(alo), np.abs(ahi))
    mag_lo = np.where(contains_zero(alo, ahi), 0.0, np.minimum(np.abs(alo), np.abs(ahi)))
    return _pow_chain_down(mag_lo, p), _pow_chain_up(mag_hi, p)


def _widen_transcendental(lo, hi):
    slo = np.spacing(np.abs(lo)) * _TRANSCENDENTAL_ULPS
    shi = np.spacing(np.abs(hi)) * _TRANSCENDENTAL_ULPS
    return down(lo - slo), up(hi + shi)


def iexp(alo, ahi):
    with np.errstate(over="ignore"):
        lo, hi = _widen_transcendental(np.exp(alo), np.exp(ahi))
    lo = np.maximum(lo, 0.0)
    _check_finite(lo, hi, "exp")
    return lo, hi


def ilog(alo, ahi):
    """Caller must ensure ``alo > 0``."""
    return _widen_transcendental(np.log(alo), np.log(ahi))


@dataclass(frozen=True)
class Interval:
    """A closed interval ``[lo, hi]`` with finite bounds."""

    lo: float
    hi: float

    def __post_init__(self):
        lo, hi = float(self.lo), float(self.hi)
        if not (np.isfinite(lo) and np.isfinite(hi)):
            raise IntervalError(f"interval bounds must be finite, got [{lo}, {hi}]")
        if lo > hi:
            raise ValueError(f"empty interval [{lo}, {hi}]")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @classmethod
    def point(cls, v: float) -> "Interval":
        return cls(v, v)

    @property
    def width(self) -> float:
        return self.hi - self.lo

    @property
    def mid(self) -> float:
        return 0.5 * (self.lo + self.hi)

    def __contains__(self, v) -> bool:
        if isinstance(v, Interval):
            return self.lo <= v.lo and v.hi <= self.hi
        return self.lo <= v <= self.hi

    def hull(self, other: "Interval") -> "Interval":
        return Interval(min(self.lo, other.lo), max(self.hi, other.hi))

    def _coerce(self, other) -> "Interval":
        return other if isinstance(other, Interval) else Interval.point(other)

    def __add__(self, other):
        o = self._coerce(other)
        return Interval(*map(float, iadd(self.lo, self.hi, o.lo, o.hi)))

    __radd__ = __add__

    def __sub__(self, other):
        o = self._coerce(other)
        return Interval(*map(float, isub(self.lo, self.hi, o.lo, o.hi)))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        o = self._coerce(other)
        return Interval(*map(float, imul(self.lo, self.hi, o.lo, o.hi)))

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = self._coerce(other)
        if o.lo <= 0.0 <= o.hi:
            raise IntervalError(f"division by an interval containing zero: {o}")
        return Interval(*map(float, idiv(self.lo, self.hi, o.lo, o.hi)))

    def __neg__(self):
        return Interval(-self.hi, -self.lo)

    def __repr__(self):
        return f"Interval({self.lo!r}, {self.hi!r})"


class Box:
    """Axis-aligned box stored as lower/upper bound vectors."""

    __slots__ = ("lo", "hi")

    def __init__(self, lo, hi=None):
        lo = np.array(lo, dtype=float).reshape(-1)
        hi = lo.copy() if hi is None else np.array(hi, dtype=float).reshape(-1)
        if lo.shape != hi.shape:
            raise ValueError("box bounds have different lengths")
        if np.any(lo > hi):
            raise ValueError(f"empty box: lo={lo}, hi={hi}")
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise IntervalError("box bounds must be finite")
        self.lo = lo
        self.hi = hi

    @classmethod
    def from_intervals(cls, intervals: Iterable[Interval]) -> "Box":
        ivs = list(intervals)
        return cls([iv.lo for iv in ivs], [iv.hi for iv in ivs])

    @classmethod
    def around(cls, center, radius) -> "Box":
        c = np.asarray(center, dtype=float)
        return cls(down(c - radius), up(c + radius))

    @property
    def dim(self) -> int:
        return self.lo.size

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.lo + self.hi)

    @property
    def widths(self) -> np.ndarray:
        return self.hi - self.lo

    @property
    def diameter(self) -> float:
        """Euclidean diameter (length of the main diagonal)."""
        return float(np.linalg.norm(self.widths))

    def intervals(self) -> list:
        return [Interval(a, b) for a, b in zip(self.lo, self.hi)]

    def __iter__(self):
        return iter(self.intervals())

    def __len__(self):
        return self.dim

    def contains_point(self, x, tol: float = 0.0) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= self.lo - tol) and np.all(x <= self.hi + tol))

    def contains(self, other: "Box") -> bool:
        return bool(np.all(other.lo >= self.lo) and np.all(other.hi <= self.hi))

    def hull(self, other: "Box") -> "Box":
        return Box(np.minimum(self.lo, other.lo), np.maximum(self.hi, other.hi))

    def bloat(self, radius) -> "Box":
        """Minkowski sum with the box of half-width ``radius`` (outer box of an l2 ball)."""
        return Box(down(self.lo - radius), up(self.hi + radius))

    def project(self, dims: Sequence[int]) -> "Box":
        idx = list(dims)
        return Box(self.lo[idx], self.hi[idx])

    def __repr__(self):
        parts = ", ".join(f"[{a:.6g}, {b:.6g}]" for a, b in zip(self.lo, self.hi))
        return f"Box({parts})"


@dataclass(frozen=True, eq=False)
class IntervalMatrix:
    """The set of real matrices bounded element-wise by ``lower`` and ``upper``."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lower = np.array(self.lower, dtype=float)
        upper = np.array(self.upper, dtype=float)
        if lower.shape != upper.shape or lower.ndim != 2:
            raise ValueError("interval matrix bounds must be matrices of equal shape")
        if np.any(lower > upper):
            raise ValueError("interval matrix has lower > upper entries")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @property
    def shape(self):
        return self.lower.shape

    def center(self) -> np.ndarray:
        return 0.5 * (self.lower + self.upper)

    def contains(self, a, tol: float = 0.0) -> bool:
        a = np.asarray(a, dtype=float)
        return bool(np.all(a >= self.lower - tol) and np.all(a <= self.upper + tol))

    def hull(self, other: "IntervalMatrix") -> "IntervalMatrix":
        return IntervalMatrix(np.minimum(self.lower, other.lower), np.maximum(self.upper, other.upper))

    def sample(self, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
        shape = self.shape if size is None else (size,) + self.shape
        return rng.uniform(self.lower, self.upper, size=shape)

    def __repr__(self):
        return f"IntervalMatrix(lower={self.lower.tolist()}, upper={self.upper.tolist()})"
