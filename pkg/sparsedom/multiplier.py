# vim: set filetype=python ts=4 sw=4
# -*- coding: utf-8 -*-
"""Multipliers on the frequency plane and the trilinear forms they define.

Tasks include:
1. Evaluate multipliers m(xi_1, xi_2, -xi_1 - xi_2) in the (xi_1, xi_2) chart.
2. Measure decay constants with central finite differences.
3. Compute Lambda_m by discrete Fourier quadrature, and T_m(f1, f2) by FFT.
4. Build the counterexample family and run the sharpness experiment.
5. Vector valued forms, weak type exceptional sets and the range check.

Frequencies are angular and the Fourier transform is f^(xi) = int f(x) exp(-i x xi) dx.
Lambda_m carries the factor (2 pi)**-2, so m = 1 gives int f1 f2 f3.
"""
import csv
from dataclasses import dataclass
from dataclasses import field
from fractions import Fraction
import io
import logging
import math

import numpy as np
from scipy import interpolate
from scipy import stats
from sparsedom.grid import admissible_below
from sparsedom.grid import as_exponent
from sparsedom.grid import INF
from sparsedom.grid import Interval
from sparsedom.grid import reciprocal
from sparsedom.signals import local_average
from sparsedom.signals import lp_norm
from sparsedom.signals import maximal_profile
from sparsedom.signals import SampledFunction
from sparsedom.signals import VectorSignal
from sparsedom.sparse import collection_digest
from sparsedom.sparse import psf_eval
from sparsedom.sparse import SparseFormSpec
from sparsedom.sparse import tripled
from sparsedom.tiles import DominationError
from sparsedom.tiles import sparse_collections_for

logger = logging.getLogger(__name__)

KINDS = ("identity", "bht_sign", "counterexample", "tabulated")
# Inner and outer radius of the bump profile.
BUMP_FLAT = 2.0**-4
BUMP_SUPPORT = 2.0**-3
# Dilation of the first two factors of the counterexample family.
NARROWING = 256
ALIASING_BAND = 0.8
ALIASING_TOLERANCE = 1e-9
# Entries of one block of the frequency plane held in memory at a time.
ROW_BUDGET = 2**20
HOLE_RATIO = 2.0**-12
DENSITY_RATIO = 2.0**-5
BHT_BETA = (1.0 / math.sqrt(2.0), -1.0 / math.sqrt(2.0), 0.0)
BHT_GAMMA = (1.0 / math.sqrt(6.0), 1.0 / math.sqrt(6.0), -2.0 / math.sqrt(6.0))
SHARPNESS_BETA = (2.0, -3.0, 1.0)
SHARPNESS_SIZES = (1, 2, 4, 8, 16)
_TOLERANCE = 1e-9


def smooth_step(t):
    """C-infinity step, 0 for t <= 0 and 1 for t >= 1."""
    t = np.clip(t, 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        rise = np.where(t > 0, np.exp(-1.0 / np.where(t > 0, t, 1.0)), 0.0)
        fall = np.where(t < 1, np.exp(-1.0 / np.where(t < 1, 1.0 - t, 1.0)), 0.0)
    return rise / (rise + fall)


def bump(u):
    """Even bump, 1 on [-1/16, 1/16] and 0 outside (-1/8, 1/8)."""
    distance = np.abs(np.asarray(u, dtype=float))
    return smooth_step((BUMP_SUPPORT - distance) / (BUMP_SUPPORT - BUMP_FLAT))


@dataclass(frozen=True)
class GammaParametrization:
    """Orthonormal basis (beta, gamma) of the plane xi_1 + xi_2 + xi_3 = 0."""

    beta: tuple
    gamma: tuple

    def __post_init__(self):
        """Check orthonormality, the plane and nondegeneracy."""
        beta = np.asarray(self.beta, dtype=float)
        gamma = np.asarray(self.gamma, dtype=float)
        if beta.shape != (3,) or gamma.shape != (3,):
            raise ValueError("beta and gamma need three entries")
        checks = (
            abs(beta.sum()),
            abs(gamma.sum()),
            abs(np.linalg.norm(beta) - 1),
            abs(np.linalg.norm(gamma) - 1),
            abs(beta @ gamma),
        )
        if max(checks) > _TOLERANCE:
            raise ValueError("beta and gamma must be an orthonormal basis of the plane")
        object.__setattr__(self, "beta", tuple(float(b) for b in beta))
        object.__setattr__(self, "gamma", tuple(float(g) for g in gamma))
        if self.delta <= _TOLERANCE:
            raise ValueError(f"beta {self.beta} is degenerate")

    @classmethod
    def default(cls):
        """Basis with beta along (1, -1, 0), the direction of the bilinear Hilbert transform."""
        return cls(BHT_BETA, BHT_GAMMA)

    @classmethod
    def from_beta(cls, beta):
        """Project beta to the plane, normalize it and complete the basis."""
        beta = np.asarray(beta, dtype=float)
        beta = beta - beta.mean()
        beta = beta / np.linalg.norm(beta)
        gamma = np.cross(beta, np.ones(3) / math.sqrt(3.0))
        return cls(tuple(beta), tuple(gamma / np.linalg.norm(gamma)))

    @property
    def delta(self):
        """Nondegeneracy min over k != j of |beta_k - beta_j|."""
        b1, b2, b3 = self.beta
        return min(abs(b1 - b2), abs(b1 - b3), abs(b2 - b3))

    def line(self, xi1, xi2):
        """Signed distance xi . beta of (xi1, xi2, -xi1 - xi2) to the singular line."""
        b1, b2, b3 = self.beta
        return (b1 - b3) * np.asarray(xi1, dtype=float) + (b2 - b3) * np.asarray(xi2, dtype=float)

    def slope(self):
        """Change of xi . beta per unit step in xi_1 plus per unit step in xi_2."""
        b1, b2, b3 = self.beta
        return abs(b1 - b3) + abs(b2 - b3)

    def eta(self, n):
        """The lattice point n gamma + beta."""
        return tuple(n * g + b for g, b in zip(self.gamma, self.beta))

    def to_json(self):
        """Serialize both vectors."""
        return {"beta": list(self.beta), "gamma": list(self.gamma)}


class MultiplierSpec:
    """A multiplier on the plane, evaluated in the (xi_1, xi_2) chart."""

    def __init__(
        self,
        kind,
        parametrization=None,
        signs=None,
        narrowing=NARROWING,
        dilation=1.0,
        table=None,
    ):
        """Describe a multiplier.

        :param kind: one of KINDS
        :param parametrization: GammaParametrization, defaults to the standard one
        :param signs: counterexample signs, one per bump
        :param narrowing: dilation of the first two counterexample factors
        :param dilation: frequency scale of the whole counterexample family
        :param table: for tabulated multipliers, a tuple (points, values)
        """
        if kind not in KINDS:
            raise ValueError(f"Multiplier kind must be one of {KINDS}, got '{kind}'")
        self.kind = kind
        self.parametrization = parametrization or GammaParametrization.default()
        self.signs = None if signs is None else np.asarray(signs, dtype=float)
        self.narrowing = float(narrowing)
        self.dilation = float(dilation)
        self.decay = None
        self._interpolator = None
        self._table_box = None
        if kind == "counterexample" and (self.signs is None or self.signs.size == 0):
            raise ValueError("Counterexample multipliers need at least one sign")
        if kind == "tabulated":
            if table is None:
                raise ValueError("Tabulated multipliers need a table")
            points, values = table
            points = np.asarray(points, dtype=float)
            self._interpolator = interpolate.LinearNDInterpolator(
                points, np.asarray(values, dtype=complex), fill_value=0.0
            )
            self._table_box = (points.min(axis=0), points.max(axis=0))

    def __repr__(self):
        """Short representation."""
        extra = "" if self.signs is None else f", M={self.signs.size}"
        return f"MultiplierSpec(kind={self.kind}{extra})"

    @classmethod
    def from_csv(cls, source, parametrization=None):
        """Load a tabulated multiplier from CSV rows xi1,xi2,re,im with a header.

        :param source: path or file object
        """
        data = np.loadtxt(source, delimiter=",", skiprows=1, ndmin=2)
        if data.shape[1] != 4:
            raise ValueError("Multiplier tables need the columns xi1,xi2,re,im")
        return cls(
            "tabulated",
            parametrization,
            table=(data[:, :2], data[:, 2] + 1j * data[:, 3]),
        )

    @property
    def size(self):
        """Number of counterexample bumps, or zero."""
        return 0 if self.signs is None else int(self.signs.size)

    def centers(self):
        """Bump centers dilation * eta^n, as an (M, 3) array."""
        etas = [self.parametrization.eta(n) for n in range(self.size)]
        return self.dilation * np.array(etas).reshape(-1, 3)

    def radii(self):
        """Support radii of the three bump factors."""
        outer = BUMP_SUPPORT * self.dilation
        return np.array([outer / self.narrowing, outer / self.narrowing, outer])

    def is_real(self):
        """True when the multiplier only takes real values."""
        return self.kind != "tabulated"

    def factors(self, n, xi, coordinate):
        """Bump factor of term n in one coordinate, evaluated at xi."""
        center = self.parametrization.eta(n)[coordinate]
        scale = self.narrowing if coordinate < 2 else 1.0
        return bump(scale * (np.asarray(xi, dtype=float) / self.dilation - center))

    def evaluate(self, xi1, xi2):
        """Evaluate m(xi1, xi2, -xi1 - xi2), broadcasting the arguments."""
        xi1, xi2 = np.broadcast_arrays(np.asarray(xi1, dtype=float), np.asarray(xi2, dtype=float))
        if self.kind == "identity":
            return np.ones(xi1.shape)
        if self.kind == "bht_sign":
            return np.sign(self.parametrization.line(xi1, xi2))
        if self.kind == "tabulated":
            return self._interpolator(xi1, xi2)
        total = np.zeros(xi1.shape)
        xi3 = -xi1 - xi2
        for n, sign in enumerate(self.signs):
            first = self.factors(n, xi1, 0)
            if not np.any(first):
                continue
            total += sign * first * self.factors(n, xi2, 1) * self.factors(n, xi3, 2)
        return total

    def sample_points(self, count=65):
        """Points of the (xi_1, xi_2) chart sampled by decay_constants, with their spacing."""
        if self.kind == "counterexample":
            radius = self.radii()[0]
            offsets = np.linspace(-1.25 * radius, 1.25 * radius, 17)
            patch = np.stack(np.meshgrid(offsets, offsets, indexing="ij"), axis=-1).reshape(-1, 2)
            centers = self.centers()[:, :2]
            points = (centers[:, None, :] + patch[None, :, :]).reshape(-1, 2)
            return points, offsets[1] - offsets[0]
        if self.kind == "tabulated":
            low, high = self._table_box
        else:
            low, high = np.full(2, -4.0 * self.dilation), np.full(2, 4.0 * self.dilation)
        axes = [np.linspace(low[i], high[i], count) for i in range(2)]
        points = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 2)
        return points, float(min(axes[0][1] - axes[0][0], axes[1][1] - axes[1][0]))

    def to_json(self):
        """Serialize the defining parameters."""
        data = {"kind": self.kind, "parametrization": self.parametrization.to_json()}
        if self.kind == "counterexample":
            data.update(
                {
                    "signs": [int(sign) for sign in self.signs],
                    "narrowing": self.narrowing,
                    "dilation": self.dilation,
                }
            )
        if self.decay is not None:
            data["decay"] = list(self.decay)
        return data


def counterexample_build(signs, size=None, parametrization=None, narrowing=NARROWING, dilation=1.0):
    """Build the sum over n < M of sigma_n times a product of three bumps.

    The factors are bump(a (xi_1 - eta_1)), bump(a (xi_2 - eta_2)) and bump(xi_3 - eta_3)
    with eta = n gamma + beta and a the narrowing, 2**8 unless given.

    :param signs: sequence of +1 and -1
    :param size: M, defaults to the number of signs
    :param parametrization: GammaParametrization
    :return: MultiplierSpec
    """
    signs = [int(sign) for sign in signs]
    size = len(signs) if size is None else int(size)
    if size < 1 or len(signs) != size:
        raise ValueError(f"Need M >= 1 signs, got {len(signs)} for M={size}")
    if any(sign not in (-1, 1) for sign in signs):
        raise ValueError("Signs must be +1 or -1")
    if narrowing < 1 or dilation <= 0:
        raise ValueError("Narrowing must be at least 1 and the dilation positive")
    return MultiplierSpec("counterexample", parametrization, signs, narrowing, dilation)


def bumps_disjoint(m):
    """Check that the supports of the counterexample terms are pairwise disjoint."""
    centers, radii = m.centers(), m.radii()
    for n in range(m.size):
        for k in range(n + 1, m.size):
            apart = np.abs(centers[n] - centers[k]) >= 2 * radii
            if not np.any(apart):
                return False
    return True


def _stencil(order):
    """Central difference weights at offsets (order/2 - i), i = 0..order."""
    return [(order - 2 * i, (-1) ** i * math.comb(order, i)) for i in range(order + 1)]


def decay_constants(m, n_max=4, cumulative=True, spacing=None):
    """Measure C_N = sup dist(xi, beta-perp)**|alpha| |d^alpha m(xi)| on sampled points.

    Points whose difference stencil reaches within one grid step of the
    singular line are skipped. Derivatives are taken in the (xi_1, xi_2) chart.

    :param m: MultiplierSpec
    :param n_max: largest order
    :param cumulative: report the sup over |alpha| <= N, otherwise over |alpha| = N
    :param spacing: stencil step, defaults to an eighth of the sample spacing
    :return: list of n_max + 1 floats
    """
    points, grid_step = m.sample_points()
    delta = grid_step / 8 if spacing is None else float(spacing)
    parametrization = m.parametrization
    reach = 0.5 * n_max * delta * parametrization.slope()
    distance = np.abs(parametrization.line(points[:, 0], points[:, 1]))
    keep = distance > max(grid_step, reach) * (1 + _TOLERANCE)
    points, distance = points[keep], distance[keep]
    offsets = np.arange(-n_max, n_max + 1)
    values = {}
    for a in offsets:
        for b in offsets:
            values[(a, b)] = m.evaluate(points[:, 0] + a * delta / 2, points[:, 1] + b * delta / 2)
    per_order = []
    for order in range(n_max + 1):
        best = 0.0
        for first in range(order + 1):
            derivative = 0.0
            for a, wa in _stencil(first):
                for b, wb in _stencil(order - first):
                    derivative = derivative + wa * wb * values[(a, b)]
            scaled = distance**order * np.abs(derivative) / delta**order
            if scaled.size:
                best = max(best, float(np.max(scaled)))
        per_order.append(best)
    logger.debug(f"Decay constants of {m}: {per_order}")
    if cumulative:
        return [float(value) for value in np.maximum.accumulate(per_order)]
    return per_order


@dataclass
class QuadratureResult:
    """Value of a form with the warnings and tolerances of its computation."""

    value: complex
    warnings: list = field(default_factory=list)
    tolerances: dict = field(default_factory=dict)
    inputs: dict = field(default_factory=dict)

    def to_json(self):
        """Serialize as a JSON record."""
        return {
            "inputs": self.inputs,
            "value": [float(np.real(self.value)), float(np.imag(self.value))],
            "warnings": list(self.warnings),
            "tolerances": self.tolerances,
        }


def _padded_spectra(functions, pad):
    """Zero pad the inputs to a common power of two and transform them."""
    first = functions[0]
    for f in functions[1:]:
        if not first.same_grid(f):
            raise ValueError("Inputs must share one grid")
    if pad < 1:
        raise ValueError(f"Padding factor must be at least 1, got {pad}")
    count = 2 ** math.ceil(math.log2(pad * first.size))
    spectra = [np.fft.fft(f.values, count) for f in functions]
    frequencies = 2 * np.pi * np.fft.fftfreq(count, d=first.step)
    return spectra, frequencies, count


def aliasing_fraction(spectrum):
    """Share of the spectral energy beyond 80% of the Nyquist frequency."""
    count = spectrum.size
    index = np.abs(np.fft.fftfreq(count) * count)
    energy = np.abs(spectrum) ** 2
    total = energy.sum()
    if total == 0:
        return 0.0
    return float(energy[index > ALIASING_BAND * count / 2].sum() / total)


def _aliasing_warnings(spectra):
    warnings = []
    for j, spectrum in enumerate(spectra, start=1):
        share = aliasing_fraction(spectrum)
        if share > ALIASING_TOLERANCE:
            message = f"aliasing: f{j} has {share:.3g} of its energy near the Nyquist frequency"
            logger.warning(message)
            warnings.append(message)
    return warnings


def _rows(count):
    rows = max(1, ROW_BUDGET // count)
    for start in range(0, count, rows):
        yield np.arange(start, min(start + rows, count))


def _separable(m, method):
    if method not in ("auto", "grid", "separable"):
        raise ValueError(f"Method must be auto, grid or separable, got '{method}'")
    if method == "separable" and m.kind != "counterexample":
        raise ValueError("Only counterexample multipliers have a separable form")
    return method == "separable" or (method == "auto" and m.kind == "counterexample")


def _separable_spectrum(m, spectra, frequencies):
    """Spectrum of T_m(f1, f2) summed term by term."""
    total = np.zeros(frequencies.size, dtype=complex)
    for n, sign in enumerate(m.signs):
        first = np.fft.ifft(m.factors(n, frequencies, 0) * spectra[0])
        second = np.fft.ifft(m.factors(n, frequencies, 1) * spectra[1])
        total += sign * m.factors(n, -frequencies, 2) * np.fft.fft(first * second)
    return total


def bilinear_apply(m, f1, f2, pad=1, method="auto"):
    """Compute T_m(f1, f2)(x) = (2 pi)**-2 int m f1^(xi_1) f2^(xi_2) exp(i x (xi_1 + xi_2)).

    int T_m(f1, f2) f3 equals Lambda_m(f1, f2, f3).

    :param m: MultiplierSpec
    :param f1: SampledFunction
    :param f2: SampledFunction on the grid of f1
    :param pad: oversampling factor of the frequency grid
    :param method: "auto", "grid" or "separable"
    :return: SampledFunction on the grid of f1
    """
    spectra, frequencies, count = _padded_spectra([f1, f2], pad)
    if _separable(m, method):
        values = np.fft.ifft(_separable_spectrum(m, spectra, frequencies))
    else:
        output = np.zeros(count, dtype=complex)
        columns = np.arange(count)
        for rows in _rows(count):
            weights = m.evaluate(frequencies[rows][:, None], frequencies[None, :])
            products = weights * spectra[0][rows][:, None] * spectra[1][None, :]
            index = ((rows[:, None] + columns[None, :]) % count).ravel()
            output += np.bincount(index, products.real.ravel(), count)
            output += 1j * np.bincount(index, products.imag.ravel(), count)
        values = np.fft.ifft(output) / count
    return f1.with_values(values[: f1.size])


def lambda_m_quadrature(m, functions, pad=1, method="auto"):
    """Evaluate Lambda_m(f1, f2, f3) on the discrete frequency plane.

    The grid method sums m(xi_1, xi_2) f1^ f2^ f3^(-xi_1 - xi_2) over all pairs of
    frequency bins; the separable method integrates T_m(f1, f2) against f3.

    :param m: MultiplierSpec
    :param functions: three SampledFunction objects on a common grid
    :param pad: oversampling factor of the frequency grid
    :param method: "auto", "grid" or "separable"
    :return: QuadratureResult
    """
    functions = list(functions)
    if len(functions) != 3:
        raise ValueError(f"Expected three functions, got {len(functions)}")
    spectra, frequencies, count = _padded_spectra(functions, pad)
    step = functions[0].step
    warnings = _aliasing_warnings(spectra)
    separable = _separable(m, method)
    if separable:
        product = np.fft.ifft(_separable_spectrum(m, spectra[:2], frequencies))
        third = np.zeros(count, dtype=functions[2].values.dtype)
        third[: functions[2].size] = functions[2].values
        value = step * np.sum(product * third)
    else:
        total = 0j
        columns = np.arange(count)
        for rows in _rows(count):
            weights = m.evaluate(frequencies[rows][:, None], frequencies[None, :])
            third = spectra[2][(-rows[:, None] - columns[None, :]) % count]
            total += np.sum(weights * spectra[0][rows][:, None] * spectra[1][None, :] * third)
        value = total * step / count**2
    logger.debug(f"Lambda for {m} on {count} bins: {value}")
    return QuadratureResult(
        complex(value),
        warnings,
        {"frequency_step": 2 * np.pi / (count * step), "aliasing_band": ALIASING_BAND},
        {"multiplier": m.to_json(), "bins": count, "pad": pad, "separable": separable},
    )


def multiplier_domination_check(multipliers, functions, exponents, mode="full"):
    """Compare |Lambda_m(f)| with one sparse form shared by every multiplier.

    The sparse collection depends on the inputs only: the tripled collection of
    the grid whose sparse form is largest.

    :param multipliers: list of MultiplierSpec
    :param functions: three SampledFunction objects
    :param exponents: open admissible ExponentTuple
    :return: dict report
    :raises DominationError: if a form is positive while the sparse form vanishes
    """
    collections = sparse_collections_for(functions, exponents, mode)
    sums = {
        grid_shift: psf_eval(SparseFormSpec(exponents, collection), functions)
        for grid_shift, collection in collections.items()
    }
    chosen = max(sums, key=lambda grid_shift: (sums[grid_shift], -grid_shift))
    sparse = tripled(collections[chosen])
    rhs = psf_eval(SparseFormSpec(exponents, sparse), functions)
    records = []
    for m in multipliers:
        result = lambda_m_quadrature(m, functions)
        value = abs(result.value)
        if value > 0 and rhs == 0:
            raise DominationError(f"Lambda for {m} is {value} while the sparse form vanishes")
        ratio = 0.0 if value == 0 else value / rhs
        records.append(
            {"multiplier": m.to_json(), "form": value, "ratio": ratio, "warnings": result.warnings}
        )
    return {
        "psf": rhs,
        "grid_type": chosen,
        "records": records,
        "max_ratio": max((record["ratio"] for record in records), default=0.0),
        "collection_digest": collection_digest(sparse),
        "sparse": sparse,
    }


@dataclass
class SharpnessTable:
    """Lower bounds for the counterexample family against M."""

    rows: list
    exponent: float
    predicted: float
    info: dict = field(default_factory=dict)

    def to_csv(self):
        """Rows as CSV with the header M,lower_bound."""
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(["M", "lower_bound"])
        for row in self.rows:
            writer.writerow([row["M"], repr(row["lower_bound"])])
        return buffer.getvalue()

    def to_json(self):
        """Serialize the table."""
        return {
            "rows": self.rows,
            "exponent": self.exponent,
            "predicted": self.predicted,
            "info": self.info,
        }


def _sharpness_grid(parametrization, largest, narrowing):
    """Grid wide enough for the window and fine enough for every bump center."""
    window = 6 * narrowing / BUMP_FLAT
    half_width = 7 * window
    reach = max(
        abs(value) for n in range(largest) for value in parametrization.eta(n)
    ) + BUMP_SUPPORT
    target = np.pi / (1.25 * reach)
    count = 2 ** math.ceil(math.log2(2 * half_width / target))
    return SampledFunction.from_callable(
        lambda x: np.exp(-0.5 * (x / window) ** 2), -half_width, half_width, count
    )


def _comb(window, parametrization, coordinate, size, phases=None):
    x = window.midpoints
    total = np.zeros(window.size, dtype=complex)
    for n in range(size):
        phase = 0.0 if phases is None else phases[n]
        total += np.exp(1j * (parametrization.eta(n)[coordinate] * x + phase))
    return window.with_values(window.values * total)


def sharpness_experiment(
    q1, q2, sizes=SHARPNESS_SIZES, seeds=(0, 1, 2), narrowing=2, parametrization=None
):
    """Lower bounds for sup over signs of ||T_m||, m in the counterexample family.

    Trial functions are windowed combs over the bump centers, plain and with
    random phases; the trial family of every smaller M is tried again for each
    M, so the bounds are monotone in M up to the tails of the window.

    :param q1: exponent of f1
    :param q2: exponent of f2
    :param sizes: values of M
    :param seeds: seeds of the signs and phases
    :param narrowing: dilation of the first two bump factors
    :param parametrization: defaults to beta along (2, -3, 1)
    :return: SharpnessTable
    """
    q1, q2 = as_exponent(q1), as_exponent(q2)
    if INF in (q1, q2) or q1 <= 0 or q2 <= 0:
        raise ValueError(f"Need finite positive exponents, got ({q1}, {q2})")
    sizes = sorted({int(size) for size in sizes})
    if not sizes or sizes[0] < 1:
        raise ValueError("Sizes must be positive integers")
    predicted = float(reciprocal(q1) + reciprocal(q2) - Fraction(3, 2))
    if predicted <= 0:
        logger.warning(f"1/q1 + 1/q2 - 3/2 = {predicted:.4g}: no growth is expected")
    target = float(q1 * q2 / (q1 + q2))
    parametrization = parametrization or GammaParametrization.from_beta(SHARPNESS_BETA)
    window = _sharpness_grid(parametrization, sizes[-1], narrowing)

    trials = {}
    draws = {}
    for seed in seeds:
        rng = np.random.default_rng(seed)
        signs = rng.choice([-1, 1], size=sizes[-1])
        phases = rng.uniform(0, 2 * np.pi, size=sizes[-1])
        draws[seed] = signs
        for size in sizes:
            first = _comb(window, parametrization, 0, size)
            for variant in (None, phases):
                second = _comb(window, parametrization, 1, size, variant)
                scale = lp_norm(first, q1) * lp_norm(second, q2)
                trials.setdefault(seed, []).append((size, first, second, scale))

    rows = []
    for size in sizes:
        best, best_seed = 0.0, None
        for seed in seeds:
            m = counterexample_build(draws[seed][:size], size, parametrization, narrowing)
            for level, first, second, scale in trials[seed]:
                if level > size:
                    continue
                value = lp_norm(bilinear_apply(m, first, second), target) / scale
                if value > best:
                    best, best_seed = value, seed
        rows.append({"M": size, "lower_bound": float(best), "seed": best_seed})
        logger.info(f"Sharpness M={size}: lower bound {best:.6g}")

    exponent = math.nan
    if len(rows) > 1:
        fit = stats.linregress(
            np.log([row["M"] for row in rows]), np.log([row["lower_bound"] for row in rows])
        )
        exponent = float(fit.slope)
    return SharpnessTable(
        rows,
        exponent,
        predicted,
        {
            "q": [str(q1), str(q2)],
            "narrowing": narrowing,
            "bins": window.size,
            "seeds": list(seeds),
        },
    )


def family_decay_spread(sizes=SHARPNESS_SIZES, n_max=2, narrowing=NARROWING, seed=0):
    """Decay constants of counterexample multipliers for several M and their relative spread."""
    rng = np.random.default_rng(seed)
    signs = rng.choice([-1, 1], size=max(sizes))
    constants = {
        size: decay_constants(counterexample_build(signs[:size], size, narrowing=narrowing), n_max)
        for size in sizes
    }
    table = np.array(list(constants.values()))
    spread = (table.max(axis=0) / table.min(axis=0) - 1).tolist()
    return {"constants": {str(k): v for k, v in constants.items()}, "spread": spread}


def vector_valued_form(multipliers, signals, pad=1):
    """Sum Lambda_{m_k}(f_1k, f_2k, f_3k) over the components.

    :param multipliers: list of MultiplierSpec, one per component
    :param signals: three VectorSignal objects
    :return: dict with the sum of absolute values and the signed sum
    """
    signals = list(signals)
    if len(signals) != 3:
        raise ValueError(f"Expected three vector signals, got {len(signals)}")
    if any(len(signal) != len(multipliers) for signal in signals):
        raise ValueError(
            f"Component counts {[len(s) for s in signals]} differ from {len(multipliers)} "
            "multipliers"
        )
    values = [
        lambda_m_quadrature(m, [signal.components[k] for signal in signals], pad).value
        for k, m in enumerate(multipliers)
    ]
    signed = complex(sum(values))
    return {
        "absolute": float(sum(abs(value) for value in values)),
        "signed": [signed.real, signed.imag],
        "components": [[value.real, value.imag] for value in values],
    }


def vector_norm(signal, q):
    """The L**q(l**r) norm of a vector signal."""
    return lp_norm(signal.pointwise(), q)


def normalize_vector(signal, q):
    """Scale a vector signal to unit L**q(l**r) norm."""
    norm = vector_norm(signal, q)
    if norm == 0:
        raise ValueError("Cannot normalize a vanishing vector signal")
    return VectorSignal(
        [component.with_values(component.values / norm) for component in signal.components],
        signal.r,
    )


def _pairs(intervals):
    if isinstance(intervals, Interval):
        intervals = [intervals]
    return [(interval.left, interval.right) for interval in intervals]


def _merge(pairs):
    merged = []
    for left, right in sorted(pairs):
        if merged and left <= merged[-1][1]:
            merged[-1] = (merged[-1][0], max(merged[-1][1], right))
        else:
            merged.append((left, right))
    return merged


def _subtract(pairs, holes):
    result = []
    holes = _merge(holes)
    for left, right in _merge(pairs):
        cursor = left
        for hole_left, hole_right in holes:
            if hole_right <= cursor or hole_left >= right:
                continue
            if hole_left > cursor:
                result.append((cursor, hole_left))
            cursor = max(cursor, hole_right)
        if cursor < right:
            result.append((cursor, right))
    return result


def _total(pairs):
    return sum((right - left for left, right in pairs), Fraction(0))


def _as_intervals(pairs):
    return [Interval.from_endpoints(left, right) for left, right in pairs]


def _cell_runs(mask, origin, step):
    """Maximal runs of marked cells as exact endpoint pairs."""
    padded = np.concatenate(([False], mask, [False])).astype(int)
    edges = np.flatnonzero(np.diff(padded))
    return [
        (Fraction(origin + start * step), Fraction(origin + stop * step))
        for start, stop in zip(edges[::2], edges[1::2])
    ]


def maximal_dyadic_dense(pairs, step, ratio=DENSITY_RATIO):
    """Maximal standard dyadic Q with |Q intersect H| >= ratio |Q|.

    :param pairs: disjoint endpoint pairs of H
    :param step: smallest scale considered
    :return: list of Interval
    """
    if not pairs:
        return []
    lefts = np.array([float(left) for left, _ in pairs])
    rights = np.array([float(right) for _, right in pairs])
    measure = float(np.sum(rights - lefts))
    low = math.floor(math.log2(step))
    high = math.ceil(math.log2(measure / ratio))
    selected = []
    for scale in range(high, low - 1, -1):
        size = 2.0**scale
        first = math.floor(lefts.min() / size)
        last = math.ceil(rights.max() / size)
        candidates = np.arange(first, last) * size
        overlap = np.clip(
            np.minimum(candidates[:, None] + size, rights[None, :])
            - np.maximum(candidates[:, None], lefts[None, :]),
            0,
            None,
        ).sum(axis=1)
        for left in candidates[overlap >= ratio * size * (1 - _TOLERANCE)]:
            inside = any(
                other.left <= Fraction(left) and Fraction(left + size) <= other.right
                for other in selected
            )
            if not inside:
                selected.append(Interval(Fraction(left), Fraction(size)))
    return selected


@dataclass
class ExceptionalSets:
    """The sets H, H~ = union of 9Q and F3' = F3 minus H~."""

    holes: list
    enlarged: list
    major: list
    constant: float
    doublings: int
    measures: dict
    selected: list = field(default_factory=list)

    @property
    def valid(self):
        """|H| <= 2**-12 |F3|, |H~| <= |F3| / 8 and |F3| <= 2 |F3'|."""
        measures = self.measures
        return (
            measures["holes"] <= HOLE_RATIO * measures["f3"]
            and measures["enlarged"] <= measures["f3"] / 8
            and measures["f3"] <= 2 * measures["major"]
        )

    def to_json(self):
        """Serialize with exact endpoints."""
        return {
            "H": [interval.to_json() for interval in self.holes],
            "H_tilde": [interval.to_json() for interval in self.enlarged],
            "F3_prime": [interval.to_json() for interval in self.major],
            "constant": self.constant,
            "doublings": self.doublings,
            "measures": {key: float(value) for key, value in self.measures.items()},
            "valid": self.valid,
        }


def weak_type_sets(first, second, f3_set, exponents, q1, q2, constant=1.0, mode="full"):
    """Build the exceptional sets of the weak type argument for vector signals.

    H collects the points where ||{M_{p_j} f_jk}||_{l^{r_j}} exceeds C |F3|**(-1/q_j)
    for j = 1, 2; C doubles until |H| <= 2**-12 |F3|.

    :param first: VectorSignal F1, of unit L**q1 norm
    :param second: VectorSignal F2 on the same grid, of unit L**q2 norm
    :param f3_set: Interval or list of disjoint Intervals
    :param exponents: ExponentTuple, p1 and p2 are used
    :param q1: exponent of F1
    :param q2: exponent of F2
    :param constant: starting value of C
    :return: ExceptionalSets
    """
    grid = first.components[0]
    if not grid.same_grid(second.components[0]):
        raise ValueError("Vector signals must share one grid")
    f3_pairs = _merge(_pairs(f3_set))
    f3_measure = _total(f3_pairs)
    if f3_measure <= 0:
        raise ValueError("F3 must have positive measure")
    norms = [vector_norm(first, q1), vector_norm(second, q2)]
    if any(abs(norm - 1) > 1e-6 for norm in norms):
        logger.warning(f"Vector signals are not normalized: norms {norms}")

    profiles = []
    for signal, p, q in ((first, exponents.p1, q1), (second, exponents.p2, q2)):
        maximal = np.stack(
            [maximal_profile(component, float(p), mode)[1] for component in signal.components]
        )
        power = float(reciprocal(as_exponent(q)))
        profiles.append((signal.pointwise(maximal).values, float(f3_measure) ** -power))

    constant = float(constant)
    doublings = 0
    while True:
        mask = np.zeros(grid.size, dtype=bool)
        for values, level in profiles:
            mask |= values > constant * level
        hole_measure = mask.sum() * grid.step
        if hole_measure <= HOLE_RATIO * float(f3_measure):
            break
        constant *= 2
        doublings += 1
    if doublings:
        logger.warning(f"Weak type constant doubled {doublings} times to {constant}")

    holes = _cell_runs(mask, grid.origin, grid.step)
    selected = maximal_dyadic_dense(holes, grid.step)
    enlarged = _merge(
        [(q.center - Fraction(9, 2) * q.length, q.center + Fraction(9, 2) * q.length)
         for q in selected]
    )
    major = _subtract(f3_pairs, enlarged)
    measures = {
        "f3": f3_measure,
        "holes": _total(holes),
        "enlarged": _total(enlarged),
        "major": _total(major),
    }
    logger.debug(f"Exceptional sets with C={constant}: {measures}")
    return ExceptionalSets(
        _as_intervals(holes),
        _as_intervals(enlarged),
        _as_intervals(major),
        constant,
        doublings,
        measures,
        selected,
    )


def isk_check(collection, sets, f3, p3, ratio=DENSITY_RATIO):
    """Check |I intersect H| <= 2**-5 |I| on every interval where f3 has a nonzero average.

    :param collection: SparseCollection or list of Interval
    :param sets: ExceptionalSets
    :param f3: SampledFunction supported in F3'
    :param p3: averaging exponent
    :return: dict with the number of checked intervals and the violations
    """
    intervals = getattr(collection, "intervals", collection)
    checked, violations = 0, []
    for interval in intervals:
        if local_average(f3, interval, p3) == 0:
            continue
        checked += 1
        overlap = sum((interval.overlap(hole) for hole in sets.holes), Fraction(0))
        if overlap > ratio * interval.length:
            violations.append(
                {"interval": interval.to_json(), "density": float(overlap / interval.length)}
            )
    return {"checked": checked, "violations": violations, "holds": not violations}


def _smallest(*values):
    finite = [value for value in values if value is not INF]
    return min(finite) if finite else INF


def corvv_range(q1, q2, r):
    """Check the vector valued range for (q1, q2) and the inner exponents r.

    :param q1: exponent of F1
    :param q2: exponent of F2
    :param r: three inner exponents in (1, INF] with reciprocals summing to 1
    :return: tuple (bool, q3, witness ExponentTuple or None)
    """
    q1, q2 = as_exponent(q1), as_exponent(q2)
    r = [as_exponent(value) for value in r]
    if len(r) != 3 or any(value is not INF and value <= 1 for value in r):
        raise ValueError(f"Inner exponents must lie in (1, inf], got {r}")
    if sum(reciprocal(value) for value in r) != 1:
        raise ValueError(f"Inner exponents must have reciprocals summing to 1, got {r}")
    if any(q is not INF and q <= 1 for q in (q1, q2)):
        raise ValueError(f"Exponents must exceed 1, got ({q1}, {q2})")
    rest = max(1 - reciprocal(q1) - reciprocal(q2), Fraction(0))
    q3 = INF if rest == 0 else 1 / rest
    lower = _smallest(q1, q2)
    total = sum(
        reciprocal(_smallest(q, value, Fraction(2))) for q, value in zip((q1, q2, q3), r)
    )
    holds = lower is not INF and lower > 1 and total < 2
    witness = None
    if holds:
        witness = admissible_below([_smallest(q, value) for q, value in zip((q1, q2, q3), r)])
    logger.debug(f"Vector valued range for ({q1}, {q2}, {r}): {holds}, sum {total}")
    return holds, q3, witness


def corvv_lattice_search(q1, q2, r, steps=120):
    """Search reciprocal triples strictly between the range bounds and 1 on a lattice.

    A triple (a1, a2, a3) with a_j > max(1/q_j, 1/r_j) and a_j < 1 is accepted when
    sum(max(a_j, 1/2)) < 2. This is an independent check of corvv_range.

    :param q1: exponent of F1
    :param q2: exponent of F2
    :param r: three inner exponents
    :param steps: lattice step is 1/steps
    :return: True when an accepted triple exists
    """
    q1, q2 = as_exponent(q1), as_exponent(q2)
    r = [as_exponent(value) for value in r]
    rest = max(1 - reciprocal(q1) - reciprocal(q2), Fraction(0))
    q3 = INF if rest == 0 else 1 / rest
    offsets = np.arange(1, steps) / steps
    axes = []
    for q, value in zip((q1, q2, q3), r):
        axis = float(max(reciprocal(q), reciprocal(value))) + offsets
        axis = axis[axis < 1]
        if not axis.size:
            return False
        axes.append(np.maximum(axis, 0.5))
    first, second, third = np.meshgrid(*axes, indexing="ij", sparse=True)
    return bool(np.any(first + second + third < 2))
