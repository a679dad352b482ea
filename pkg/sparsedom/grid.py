# vim: set filetype=python ts=4 sw=4
# -*- coding: utf-8 -*-
"""Exact interval arithmetic, shifted dyadic grids and exponent tuples.

Every endpoint is a :class:`fractions.Fraction`, so grid membership and the
three-grid embedding are decided exactly. Infinite exponents use the
:data:`INF` marker instead of a float sentinel.
"""
from dataclasses import dataclass
import enum
from fractions import Fraction
import logging
import math

import numpy as np

logger = logging.getLogger(__name__)


class Infinity(enum.Enum):
    """Marker for an infinite exponent."""

    INF = "inf"

    def __repr__(self):
        """Short representation."""
        return "INF"

    def __str__(self):
        """Serialize as the string used in experiment files."""
        return "inf"


INF = Infinity.INF


def as_fraction(value):
    """Convert a number or a string such as "3/2" to a Fraction.

    Floats go through their shortest decimal representation, so 1.1 becomes 11/10.

    :param value: int, float, str or Fraction
    :return: Fraction
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, float):
        if not math.isfinite(value):
            raise ValueError(f"Cannot convert {value} to a rational number")
        return Fraction(str(value))
    return Fraction(value)


def as_exponent(value):
    """Parse an exponent, returning INF for infinite values.

    :param value: number, Fraction, "inf" or INF
    :return: Fraction or INF
    """
    if value is INF:
        return INF
    if isinstance(value, str) and value.strip().lower() in ("inf", "infinity", "∞"):
        return INF
    if isinstance(value, float) and math.isinf(value) and value > 0:
        return INF
    return as_fraction(value)


def reciprocal(p):
    """Return 1/p exactly, with 1/INF = 0."""
    if p is INF:
        return Fraction(0)
    return 1 / as_fraction(p)


def exponent_to_float(p):
    """Convert an exponent to float, INF to math.inf."""
    return math.inf if p is INF else float(p)


def ceil_log2(value):
    """Return the least integer k with 2**k >= value, for a positive Fraction."""
    k = value.numerator.bit_length() - value.denominator.bit_length()
    while Fraction(2) ** k < value:
        k += 1
    while Fraction(2) ** (k - 1) >= value:
        k -= 1
    return k


@dataclass(frozen=True)
class Interval:
    """Half-open interval [left, left + length) with rational endpoints."""

    left: Fraction
    length: Fraction

    def __post_init__(self):
        """Normalize endpoints to Fractions and check the length."""
        object.__setattr__(self, "left", as_fraction(self.left))
        object.__setattr__(self, "length", as_fraction(self.length))
        if self.length <= 0:
            raise ValueError(f"Interval length must be positive, got {self.length}")

    @classmethod
    def from_endpoints(cls, left, right):
        """Build an interval from its endpoints."""
        left = as_fraction(left)
        return cls(left, as_fraction(right) - left)

    @property
    def right(self):
        """Right endpoint."""
        return self.left + self.length

    @property
    def center(self):
        """Center c(I)."""
        return self.left + self.length / 2

    def bounds(self):
        """Return the endpoints as floats."""
        return float(self.left), float(self.right)

    def contains(self, other):
        """Check whether another interval lies inside this one."""
        return self.left <= other.left and other.right <= self.right

    def contains_point(self, x):
        """Check whether left <= x < right."""
        return float(self.left) <= x < float(self.right)

    def intersection(self, other):
        """Return the common part of two intervals, or None."""
        left = max(self.left, other.left)
        right = min(self.right, other.right)
        if right <= left:
            return None
        return Interval.from_endpoints(left, right)

    def overlap(self, other):
        """Length of the intersection with another interval."""
        common = self.intersection(other)
        return Fraction(0) if common is None else common.length

    def translate(self, shift):
        """Return the interval moved by shift."""
        return Interval(self.left + as_fraction(shift), self.length)

    def to_json(self):
        """Serialize as an exact endpoint pair."""
        return [str(self.left), str(self.right)]

    @classmethod
    def from_json(cls, pair):
        """Inverse of to_json."""
        return cls.from_endpoints(Fraction(pair[0]), Fraction(pair[1]))


@dataclass(frozen=True, order=True)
class DyadicInterval:
    """Element of one of the three shifted dyadic grids.

    The grid D_j at scale 2**k has left endpoints 2**k * (n + s_k j/3) with
    s_k = (-1)**k. At even scales this is the plain j/3 shift; the alternating
    sign keeps every D_j nested across scales.
    """

    scale_k: int
    offset_n: int
    grid_shift_j: int = 0

    def __post_init__(self):
        """Validate the grid index."""
        if self.grid_shift_j not in (0, 1, 2):
            raise ValueError(f"grid_shift_j must be 0, 1 or 2, got {self.grid_shift_j}")

    @staticmethod
    def shift_at(scale_k, grid_shift_j):
        """Fractional offset of grid D_j at scale 2**k."""
        sign = 1 if scale_k % 2 == 0 else -1
        return Fraction(sign * grid_shift_j, 3)

    @classmethod
    def containing(cls, x, scale_k, grid_shift_j=0):
        """Return the grid interval at scale 2**k containing the point x."""
        size = Fraction(2) ** scale_k
        offset = math.floor(as_fraction(x) / size - cls.shift_at(scale_k, grid_shift_j))
        return cls(scale_k, offset, grid_shift_j)

    from_point = containing

    @property
    def length(self):
        """Side length 2**k."""
        return Fraction(2) ** self.scale_k

    @property
    def interval(self):
        """The realized half-open interval."""
        size = self.length
        shift = self.shift_at(self.scale_k, self.grid_shift_j)
        return Interval(size * (self.offset_n + shift), size)

    @property
    def left(self):
        """Left endpoint."""
        return self.interval.left

    @property
    def right(self):
        """Right endpoint."""
        return self.interval.right

    @property
    def center(self):
        """Center."""
        return self.interval.center

    def parent(self):
        """Grid interval one scale up containing this one."""
        return DyadicInterval.containing(self.left, self.scale_k + 1, self.grid_shift_j)

    def children(self):
        """The two grid intervals one scale down."""
        first = DyadicInterval.containing(self.left, self.scale_k - 1, self.grid_shift_j)
        second = DyadicInterval(first.scale_k, first.offset_n + 1, self.grid_shift_j)
        return first, second

    def contains(self, other):
        """Containment, accepting intervals or dyadic intervals."""
        other = other.interval if isinstance(other, DyadicInterval) else other
        return self.interval.contains(other)

    def to_json(self):
        """Serialize grid coordinates."""
        return [self.scale_k, self.offset_n, self.grid_shift_j]


def dilate(interval, factor):
    """Scale an interval about its center.

    :param interval: Interval or DyadicInterval
    :param factor: positive rational
    :return: Interval with the same center and length multiplied by factor
    """
    factor = as_fraction(factor)
    if factor <= 0:
        raise ValueError(f"Dilation factor must be positive, got {factor}")
    if isinstance(interval, DyadicInterval):
        interval = interval.interval
    length = interval.length * factor
    return Interval(interval.center - length / 2, length)


def three_grid_embed(interval):
    """Find the shifted dyadic interval containing 3I.

    Candidates of the least possible length are compared first, and among those
    the least center wins.

    :param interval: Interval
    :return: tuple (DyadicInterval, grid type)
    """
    if isinstance(interval, DyadicInterval):
        interval = interval.interval
    tripled = dilate(interval, 3)
    start = ceil_log2(tripled.length)
    for scale_k in range(start, start + 3):
        candidates = []
        for grid_shift_j in (0, 1, 2):
            candidate = DyadicInterval.containing(tripled.left, scale_k, grid_shift_j)
            if candidate.right >= tripled.right:
                candidates.append(candidate)
        if candidates:
            best = min(candidates, key=lambda item: item.center)
            logger.debug(f"Embedded {interval} into {best.interval} of type {best.grid_shift_j}")
            return best, best.grid_shift_j
    raise RuntimeError(f"No shifted dyadic interval contains 3I for {interval}")


def chi_weight(interval, order, x):
    """Evaluate chi_I(x)**N = (1 + ((x - c(I)) / l(I))**2)**(-N).

    :param interval: Interval
    :param order: positive integer N
    :param x: point or array of points
    :return: float or array
    """
    if int(order) != order or order < 1:
        raise ValueError(f"Order must be a positive integer, got {order}")
    center = float(interval.center)
    length = float(interval.length)
    scaled = (np.asarray(x, dtype=float) - center) / length
    return (1.0 / (1.0 + scaled**2)) ** int(order)


@dataclass(frozen=True)
class ExponentTuple:
    """Tuple (p1, p2, p3) with entries in [1, INF]."""

    p1: Fraction
    p2: Fraction
    p3: Fraction

    def __post_init__(self):
        """Parse entries and enforce p_j >= 1."""
        for name in ("p1", "p2", "p3"):
            value = as_exponent(getattr(self, name))
            if value is not INF and value < 1:
                raise ValueError(f"{name} must be at least 1, got {value}")
            object.__setattr__(self, name, value)

    def __iter__(self):
        """Iterate over the three exponents."""
        return iter((self.p1, self.p2, self.p3))

    def reciprocals(self):
        """Return (1/p1, 1/p2, 1/p3)."""
        return tuple(reciprocal(p) for p in self)

    def is_finite(self):
        """True when no entry is INF."""
        return all(p is not INF for p in self)

    def as_floats(self):
        """Entries as floats."""
        return tuple(exponent_to_float(p) for p in self)

    def epsilon(self):
        """Exact value of 2 - sum 1/min(p_j, 2)."""
        return Fraction(2) - sum(
            reciprocal(Fraction(2) if p is INF or p > 2 else p) for p in self
        )

    def to_json(self):
        """Serialize as strings."""
        return [str(p) for p in self]


@dataclass(frozen=True)
class HolderTuple:
    """Tuple (q1, q2, q3) in (1, INF] with reciprocals summing to 1."""

    q1: Fraction
    q2: Fraction
    q3: Fraction

    def __post_init__(self):
        """Parse entries and check the Hölder relation exactly."""
        for name in ("q1", "q2", "q3"):
            value = as_exponent(getattr(self, name))
            if value is not INF and value <= 1:
                raise ValueError(f"{name} must exceed 1, got {value}")
            object.__setattr__(self, name, value)
        total = sum(self.reciprocals())
        if total != 1:
            raise ValueError(f"Reciprocals must sum to 1, got {total}")

    @classmethod
    def from_pair(cls, q1, q2):
        """Complete (q1, q2) with the dual exponent q3."""
        rest = 1 - reciprocal(as_exponent(q1)) - reciprocal(as_exponent(q2))
        if rest < 0:
            raise ValueError(f"1/q1 + 1/q2 exceeds 1 for ({q1}, {q2})")
        q3 = INF if rest == 0 else 1 / rest
        return cls(q1, q2, q3)

    def __iter__(self):
        """Iterate over the three exponents."""
        return iter((self.q1, self.q2, self.q3))

    def reciprocals(self):
        """Return (1/q1, 1/q2, 1/q3)."""
        return tuple(reciprocal(q) for q in self)

    def as_floats(self):
        """Entries as floats."""
        return tuple(exponent_to_float(q) for q in self)

    def to_json(self):
        """Serialize as strings."""
        return [str(q) for q in self]


def epsilon(exponents):
    """Return 2 - sum 1/min(p_j, 2) for an ExponentTuple."""
    return exponents.epsilon()


def is_admissible(exponents, open_tuple=False):
    """Check the admissibility of an exponent tuple.

    :param exponents: ExponentTuple
    :param open_tuple: require every constraint with strict inequality
    :return: boolean
    """
    if not exponents.is_finite():
        return False
    eps = exponents.epsilon()
    if open_tuple:
        return all(p > 1 for p in exponents) and eps > 0
    return eps >= 0


def admissible_below(bounds):
    """Find an open admissible tuple with p_j strictly below the given bounds.

    Such a tuple exists iff sum 1/min(b_j, 2) < 2 (with all b_j > 1). The witness
    sits at 1/p_j = 1/min(b_j, 2) + tau, tau being a sixth of the slack.

    :param bounds: three exponents (Fraction or INF), each above 1
    :return: ExponentTuple or None
    """
    capped = [Fraction(2) if b is INF or b > 2 else as_fraction(b) for b in bounds]
    if any(b <= 1 for b in capped):
        return None
    slack = 2 - sum(1 / b for b in capped)
    if slack <= 0:
        return None
    tau = slack / 6
    return ExponentTuple(*(1 / (1 / b + tau) for b in capped))


def sharp_range(q1, q2):
    """Decide whether an open admissible tuple fits below (q1, q2).

    An open admissible p with p1 < q1 and p2 < q2 exists iff 1/q1 + 1/q2 < 3/2.

    :param q1: exponent above 1, or INF
    :param q2: exponent above 1, or INF
    :return: tuple (bool, witness ExponentTuple or None)
    """
    q1, q2 = as_exponent(q1), as_exponent(q2)
    inside = reciprocal(q1) + reciprocal(q2) < Fraction(3, 2)
    witness = admissible_below((q1, q2, INF))
    logger.debug(f"Range check for ({q1}, {q2}): {inside}, witness {witness}")
    return inside, witness if inside else None
