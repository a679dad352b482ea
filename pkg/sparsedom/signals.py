# vim: set filetype=python ts=4 sw=4
# -*- coding: utf-8 -*-
"""Sampled functions, local averages and maximal functions.

A SampledFunction is a step function: cell i is [origin + i*h, origin + (i+1)*h)
and carries the sample taken at its midpoint. Integrals of |f|**p over arbitrary
intervals come from the piecewise linear antiderivative, so they are exact for
the step function itself.
"""
from fractions import Fraction
import logging
import math

import numpy as np
from sparsedom.grid import as_exponent
from sparsedom.grid import chi_weight
from sparsedom.grid import dilate
from sparsedom.grid import INF
from sparsedom.grid import Interval

logger = logging.getLogger(__name__)

MAXIMAL_MODES = ("full", "three_grid")
# Full mode scans grid aligned intervals up to this multiple of the support hull.
HULL_SCALE_CUTOFF = 4
# Three grid mode scans dyadic scales up to this multiple of the support hull.
THREE_GRID_REACH = 128
_TOLERANCE = 1e-9


class UndefinedRatioError(ArithmeticError):
    """A ratio has a vanishing denominator."""


class SampledFunction:
    """Compactly supported function sampled on a uniform grid."""

    def __init__(self, origin, step, values):
        """Build a sampled function.

        :param origin: left end of the first cell
        :param step: positive cell width h
        :param values: one dimensional array of real or complex samples
        """
        values = np.asarray(values)
        if values.ndim != 1 or values.size == 0:
            raise ValueError("Samples must be a non-empty one dimensional array")
        if not np.all(np.isfinite(values)):
            raise ValueError("Samples must be finite")
        if not step > 0:
            raise ValueError(f"Step must be positive, got {step}")
        if not np.iscomplexobj(values):
            values = values.astype(float)
        self.origin = float(origin)
        self.step = float(step)
        self.values = values
        self._prefix = {}
        self._profiles = {}

    def __repr__(self):
        """Short representation."""
        return (
            f"SampledFunction(origin={self.origin}, step={self.step}, "
            f"cells={self.values.size})"
        )

    @classmethod
    def from_callable(cls, func, start, stop, count):
        """Sample a vectorized callable at the midpoints of count cells of [start, stop).

        :param func: callable accepting a numpy array
        :param start: left end
        :param stop: right end
        :param count: number of cells
        :return: SampledFunction
        """
        count = int(count)
        if count < 1 or not stop > start:
            raise ValueError(f"Cannot sample [{start}, {stop}) with {count} cells")
        step = (stop - start) / count
        midpoints = start + step * (np.arange(count) + 0.5)
        return cls(start, step, np.asarray(func(midpoints)))

    @property
    def size(self):
        """Number of cells."""
        return self.values.size

    @property
    def stop(self):
        """Right end of the sampled domain."""
        return self.origin + self.size * self.step

    @property
    def boundaries(self):
        """Cell boundaries, size + 1 points."""
        return self.origin + self.step * np.arange(self.size + 1)

    @property
    def midpoints(self):
        """Cell midpoints."""
        return self.origin + self.step * (np.arange(self.size) + 0.5)

    def domain(self):
        """The sampled domain as an Interval."""
        return Interval(Fraction(self.origin), Fraction(self.size * self.step))

    def same_grid(self, other):
        """Check whether another function shares origin, step and size."""
        return (
            self.size == other.size
            and math.isclose(self.origin, other.origin, abs_tol=_TOLERANCE)
            and math.isclose(self.step, other.step, rel_tol=_TOLERANCE)
        )

    def with_values(self, values):
        """Return a function on the same grid with new samples."""
        return SampledFunction(self.origin, self.step, values)

    def support_hull(self):
        """Return the smallest union of cells holding every nonzero sample, or None."""
        nonzero = np.flatnonzero(self.values)
        if nonzero.size == 0:
            return None
        left = self.origin + nonzero[0] * self.step
        right = self.origin + (nonzero[-1] + 1) * self.step
        return Interval.from_endpoints(Fraction(left), Fraction(right))

    def hull_indices(self):
        """First nonzero cell and one past the last, or None."""
        nonzero = np.flatnonzero(self.values)
        if nonzero.size == 0:
            return None
        return int(nonzero[0]), int(nonzero[-1]) + 1

    def cell_index(self, x):
        """Index of the cell containing x, possibly outside the sampled range."""
        return np.floor((np.asarray(x, dtype=float) - self.origin) / self.step + _TOLERANCE)

    def evaluate(self, x):
        """Evaluate the step function, zero outside the sampled domain."""
        index = self.cell_index(x).astype(int)
        inside = (index >= 0) & (index < self.size)
        result = np.zeros(np.shape(index), dtype=self.values.dtype)
        result[inside] = self.values[index[inside]]
        return result

    def power_prefix(self, p):
        """Cumulative integrals of |f|**p at the cell boundaries.

        :param p: finite exponent, at least one
        :return: array of size + 1 values starting at zero
        """
        key = float(p)
        if key not in self._prefix:
            powered = np.abs(self.values) ** key
            self._prefix[key] = np.concatenate(([0.0], np.cumsum(powered) * self.step))
        return self._prefix[key]

    def power_integral(self, p, left, right):
        """Integral of |f|**p over [left, right), vectorized over the endpoints."""
        prefix = self.power_prefix(p)
        boundaries = self.boundaries
        upper = np.interp(right, boundaries, prefix, left=0.0, right=prefix[-1])
        lower = np.interp(left, boundaries, prefix, left=0.0, right=prefix[-1])
        return np.maximum(upper - lower, 0.0)


def _check_average_exponent(p):
    p = as_exponent(p)
    if p is not INF and p < 1:
        raise ValueError(f"Exponent must be at least 1, got {p}")
    return p


def local_average(f, interval, p):
    """Compute the p-average of |f| over an interval.

    :param f: SampledFunction
    :param interval: Interval
    :param p: exponent in [1, INF]
    :return: ((1/|I|) * integral over I of |f|**p)**(1/p)
    """
    p = _check_average_exponent(p)
    left, right = interval.bounds()
    if p is INF:
        first = max(int(f.cell_index(left)), 0)
        last = min(int(np.ceil((right - f.origin) / f.step - _TOLERANCE)), f.size)
        if last <= first:
            return 0.0
        return float(np.max(np.abs(f.values[first:last])))
    total = float(f.power_integral(float(p), left, right))
    return (total / (right - left)) ** (1.0 / float(p))


def local_averages(f, lefts, rights, p):
    """Vectorized p-averages over the intervals [lefts, rights)."""
    p = float(_check_average_exponent(p))
    lefts = np.asarray(lefts, dtype=float)
    rights = np.asarray(rights, dtype=float)
    totals = f.power_integral(p, lefts, rights)
    return (totals / (rights - lefts)) ** (1.0 / p)


def weighted_local_norm(f, interval, order, p):
    """Compute the chi_I**N weighted local norm of f.

    For finite p this is ((1/|I|) * integral |f|**p chi_I**N)**(1/p), for p = INF
    the supremum of |f| * chi_I**N.

    :param f: SampledFunction
    :param interval: Interval
    :param order: positive integer N
    :param p: exponent in [1, INF]
    :return: float
    """
    p = _check_average_exponent(p)
    if p is INF:
        # chi_I is largest at the point of each cell nearest to c(I)
        center = float(interval.center)
        nearest = np.clip(center, f.boundaries[:-1], f.boundaries[1:])
        return float(np.max(np.abs(f.values) * chi_weight(interval, order, nearest)))
    weights = chi_weight(interval, order, f.midpoints)
    total = f.step * np.sum(np.abs(f.values) ** float(p) * weights)
    return float((total / float(interval.length)) ** (1.0 / float(p)))


def restrict(f, interval):
    """Return f times the indicator of an interval, judged at cell midpoints."""
    left, right = interval.bounds()
    midpoints = f.midpoints
    keep = (midpoints >= left) & (midpoints < right)
    return f.with_values(np.where(keep, f.values, 0))


def lp_norm(f, q, weight=None):
    """Compute the L**q norm of f, optionally against a weight on the same grid.

    Exponents below one give the quasi-norm.

    :param f: SampledFunction
    :param q: positive exponent or INF
    :param weight: optional SampledFunction sharing the grid of f
    :return: float
    """
    q = as_exponent(q)
    magnitude = np.abs(f.values)
    if weight is not None and not f.same_grid(weight):
        raise ValueError("Weight must share the grid of the function")
    if q is INF:
        if weight is not None:
            magnitude = np.where(weight.values > 0, magnitude, 0.0)
        return float(np.max(magnitude))
    if q <= 0:
        raise ValueError(f"Exponent must be positive, got {q}")
    density = magnitude ** float(q)
    if weight is not None:
        density = density * weight.values
    return float((f.step * np.sum(density)) ** (1.0 / float(q)))


def _check_maximal_arguments(p, mode):
    p = _check_average_exponent(p)
    if p is INF:
        raise ValueError("Maximal functions need a finite exponent")
    if mode not in MAXIMAL_MODES:
        raise ValueError(f"Mode must be one of {MAXIMAL_MODES}, got '{mode}'")
    return float(p)


def _brute_profile(f, p):
    """Sup of p-th power averages over grid aligned intervals meeting the support.

    :return: tuple (index of first covered cell, array of values per cell)
    """
    key = ("brute", p)
    if key in f._profiles:
        return f._profiles[key]
    hull = f.hull_indices()
    if hull is None:
        f._profiles[key] = (0, np.zeros(0))
        return f._profiles[key]
    first, last = hull
    longest = HULL_SCALE_CUTOFF * (last - first)
    prefix = f.power_prefix(p)
    lengths = np.arange(1, longest + 1)
    start = first - longest + 1
    best = np.zeros(last - start + longest)
    for left in range(start, last):
        ends = np.clip(left + lengths, 0, f.size)
        totals = prefix[ends] - prefix[min(max(left, 0), f.size)]
        averages = totals / (lengths * f.step)
        # best average over intervals [left, left + m) with m >= given length
        tail_max = np.maximum.accumulate(averages[::-1])[::-1]
        offset = left - start
        np.maximum(best[offset : offset + longest], tail_max, out=best[offset : offset + longest])
    logger.debug(f"Brute force profile over {last - start} starts, lengths up to {longest}")
    f._profiles[key] = (start, best)
    return f._profiles[key]


def _scale_range(f):
    hull = f.support_hull()
    low = math.floor(math.log2(f.step))
    high = math.ceil(math.log2(THREE_GRID_REACH * float(hull.length)))
    return range(low, high + 1)


def three_grid_values(f, p, points):
    """Sup of p-th power averages over the three shifted dyadic grids at each point."""
    points = np.asarray(points, dtype=float)
    result = np.zeros(points.shape)
    if f.hull_indices() is None:
        return result
    for scale_k in _scale_range(f):
        size = 2.0**scale_k
        sign = 1 if scale_k % 2 == 0 else -1
        for grid_shift_j in (0, 1, 2):
            shift = sign * grid_shift_j / 3.0
            lefts = size * (np.floor(points / size - shift) + shift)
            totals = f.power_integral(p, lefts, lefts + size)
            np.maximum(result, totals / size, out=result)
    return result


def _window_cells(f, window):
    if window is None:
        return 0, f.size
    left, right = window.bounds()
    first = int(np.floor((left - f.origin) / f.step + _TOLERANCE))
    last = int(np.ceil((right - f.origin) / f.step - _TOLERANCE))
    return first, max(last, first + 1)


def _powered_profile(f, p, mode, first, last):
    indices = np.arange(first, last)
    points = f.origin + f.step * (indices + 0.5)
    values = three_grid_values(f, p, points)
    if mode == "full":
        start, brute = _brute_profile(f, p)
        offsets = indices - start
        inside = (offsets >= 0) & (offsets < brute.size)
        values[inside] = np.maximum(values[inside], brute[offsets[inside]])
    return points, values


def maximal_profile(f, p, mode="full", window=None):
    """Evaluate M_p f at the midpoints of the grid cells covering a window.

    :param f: SampledFunction
    :param p: finite exponent, at least one
    :param mode: "full" or "three_grid"
    :param window: Interval, defaults to the sampled domain
    :return: tuple (points, values)
    """
    p = _check_maximal_arguments(p, mode)
    first, last = _window_cells(f, window)
    points, values = _powered_profile(f, p, mode, first, last)
    return points, values ** (1.0 / p)


def maximal_function(f, p, x, mode="full"):
    """Evaluate M_p f at a point.

    A point on a cell boundary belongs to both neighbouring cells, so closed
    intervals ending at x count.

    :param f: SampledFunction
    :param p: finite exponent, at least one
    :param x: real point
    :param mode: "full" or "three_grid"
    :return: float
    """
    p = _check_maximal_arguments(p, mode)
    position = (float(x) - f.origin) / f.step
    index = int(np.floor(position + _TOLERANCE))
    first = index - 1 if abs(position - round(position)) < _TOLERANCE else index
    _, values = _powered_profile(f, p, mode, first, index + 1)
    best = max(float(values.max()), float(three_grid_values(f, p, [float(x)])[0]))
    return best ** (1.0 / p)


def inf_maximal_on(f, p, interval, mode="full"):
    """Minimum of M_p f over the grid points of 3I.

    :param f: SampledFunction
    :param p: finite exponent
    :param interval: Interval
    :param mode: "full" or "three_grid"
    :return: float
    """
    tripled = dilate(interval, 3)
    left, right = tripled.bounds()
    points, values = maximal_profile(f, p, mode, tripled)
    inside = (points >= left) & (points < right)
    if not np.any(inside):
        return maximal_function(f, p, float(interval.center), mode)
    return float(values[inside].min())


def dyadic_weighted_maximal(f, weight, p, x):
    """Weighted dyadic maximal function at a point.

    The supremum runs over standard dyadic Q containing x and lying inside the
    sampled domain of the weight. Cubes with vanishing weight are skipped.

    :param f: SampledFunction
    :param weight: nonnegative SampledFunction
    :param p: finite exponent, at least one
    :param x: real point
    :return: sup over Q of (<|f|**p w>_Q / <w>_Q)**(1/p)
    """
    p = _check_maximal_arguments(p, "full")
    if np.any(np.real(weight.values) < 0):
        raise ValueError("Weight must be nonnegative")
    product = weight.with_values(
        np.abs(f.evaluate(weight.midpoints)) ** p * np.abs(weight.values)
    )
    low = math.floor(math.log2(weight.step))
    high = math.floor(math.log2(weight.stop - weight.origin))
    x = float(x)
    best = 0.0
    for scale_k in range(low, high + 1):
        size = 2.0**scale_k
        left = size * math.floor(x / size)
        right = left + size
        if left < weight.origin - _TOLERANCE or right > weight.stop + _TOLERANCE:
            continue
        mass = float(weight.power_integral(1.0, left, right))
        if mass <= 0:
            continue
        best = max(best, float(product.power_integral(1.0, left, right)) / mass)
    return best ** (1.0 / p)


def dyadic_maximal(f, p, x):
    """Unweighted standard dyadic maximal function over the sampled domain."""
    return dyadic_weighted_maximal(f, f.with_values(np.ones(f.size)), p, x)


class VectorSignal:
    """Finite sequence of functions on a common grid with an l**r norm."""

    def __init__(self, components, r):
        """Validate the components and the inner exponent."""
        components = list(components)
        if not components:
            raise ValueError("A vector signal needs at least one component")
        for component in components[1:]:
            if not components[0].same_grid(component):
                raise ValueError("Components must share origin, step and size")
        r = as_exponent(r)
        if r is not INF and r <= 1:
            raise ValueError(f"Inner exponent must exceed 1, got {r}")
        self.components = components
        self.r = r

    def __len__(self):
        """Number of components."""
        return len(self.components)

    def stacked(self):
        """Samples as a (components, cells) array of magnitudes."""
        return np.abs(np.stack([component.values for component in self.components]))

    def pointwise(self, magnitudes=None):
        """Pointwise l**r norm as a function on the common grid."""
        magnitudes = self.stacked() if magnitudes is None else magnitudes
        if self.r is INF:
            values = magnitudes.max(axis=0)
        else:
            r = float(self.r)
            values = np.sum(magnitudes**r, axis=0) ** (1.0 / r)
        return self.components[0].with_values(values)


def vector_pointwise_norm(signal, x):
    """Evaluate the l**r norm of the components at a point."""
    magnitudes = np.abs(np.array([component.evaluate(x) for component in signal.components]))
    if signal.r is INF:
        return float(magnitudes.max())
    r = float(signal.r)
    return float(np.sum(magnitudes**r) ** (1.0 / r))


def fefferman_stein_ratio(signal, p, q, mode="full"):
    """Ratio of the L**q(l**r) norms of the maximal functions and of the components.

    Maximal functions are evaluated on the common sampled domain.

    :param signal: VectorSignal
    :param p: averaging exponent, 1 <= p < min(q, r)
    :param q: outer exponent, finite
    :param mode: maximal function mode
    :return: float
    :raises UndefinedRatioError: when every component vanishes
    """
    p = float(_check_average_exponent(p))
    q = as_exponent(q)
    if q is INF or signal.r is INF:
        raise ValueError("Strong type ratios need finite q and r")
    if not p < min(float(q), float(signal.r)):
        raise ValueError(f"Need p < min(q, r), got p={p}, q={q}, r={signal.r}")
    denominator = lp_norm(signal.pointwise(), q)
    if denominator == 0:
        raise UndefinedRatioError("All components vanish, the ratio is undefined")
    maximal = np.stack(
        [maximal_profile(component, p, mode)[1] for component in signal.components]
    )
    numerator = lp_norm(signal.pointwise(maximal), q)
    ratio = numerator / denominator
    logger.debug(f"Fefferman-Stein ratio for {len(signal)} components: {ratio}")
    return ratio
