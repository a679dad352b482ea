# vim: set filetype=python ts=4 sw=4
# -*- coding: utf-8 -*-
"""Tritiles, rank 1 collections, wave packets and tritile forms.

Frequencies are angular: a packet adapted to the tile I x w oscillates like
exp(i c(w) x). Canonical tiles have |I| |w| = 1.
"""
import csv
from dataclasses import dataclass
from dataclasses import field
from fractions import Fraction
import functools
import io
import logging
import math

import numpy as np
from sparsedom.grid import as_fraction
from sparsedom.grid import dilate
from sparsedom.grid import DyadicInterval
from sparsedom.grid import Interval
from sparsedom.signals import inf_maximal_on
from sparsedom.signals import restrict as restrict_function
from sparsedom.signals import weighted_local_norm
from sparsedom.sparse import build_sparse
from sparsedom.sparse import collection_digest
from sparsedom.sparse import psf_eval
from sparsedom.sparse import SparseFormSpec
from sparsedom.sparse import tripled
from sparsedom.sparse import type_split

logger = logging.getLogger(__name__)

DEFAULT_BETA = tuple(np.array([1.0, -0.5, -0.5]) / math.sqrt(1.5))
DEFAULT_GAMMA = (0.0, 1.0 / math.sqrt(2.0), -1.0 / math.sqrt(2.0))
DEFAULT_SEPARATION = 8
# Exponent M of the chi weights in the almost localization check.
LOCALIZATION_ORDER = 16
PACKET_BAND = 0.8


class DominationError(ArithmeticError):
    """A positive tritile form met a vanishing sparse form."""


@dataclass(frozen=True)
class Tile:
    """Time-frequency tile I x w."""

    time: DyadicInterval
    freq: Interval

    def __post_init__(self):
        """Check that the tile has area between 1/2 and 2."""
        area = self.time.length * self.freq.length
        if not Fraction(1, 2) <= area <= 2:
            raise ValueError(f"Tile area must lie in [1/2, 2], got {area}")


@dataclass(frozen=True)
class Tritile:
    """Three tiles sharing the time interval I_P."""

    time: DyadicInterval
    freqs: tuple

    def __post_init__(self):
        """Normalize the frequency intervals and check the tile areas."""
        freqs = tuple(self.freqs)
        if len(freqs) != 3:
            raise ValueError("A tritile has exactly three frequency intervals")
        object.__setattr__(self, "freqs", freqs)
        for freq in freqs:
            Tile(self.time, freq)

    def tile(self, j):
        """Component tile P_j for j in 0, 1, 2."""
        return Tile(self.time, self.freqs[j])

    @property
    def interval(self):
        """Time interval as an Interval."""
        return self.time.interval

    @functools.cached_property
    def hull(self):
        """Convex hull of the tripled frequency intervals."""
        tripled_freqs = [dilate(freq, 3) for freq in self.freqs]
        return Interval.from_endpoints(
            min(freq.left for freq in tripled_freqs), max(freq.right for freq in tripled_freqs)
        )

    def to_json(self):
        """Serialize with exact coordinates."""
        return {"time": self.time.to_json(), "freqs": [freq.to_json() for freq in self.freqs]}

    @classmethod
    def from_json(cls, data):
        """Inverse of to_json."""
        return cls(
            DyadicInterval(*data["time"]), tuple(Interval.from_json(pair) for pair in data["freqs"])
        )


@dataclass
class Rank1Collection:
    """Finite collection of tritiles with a scale separation g."""

    tritiles: list
    separation: int = DEFAULT_SEPARATION
    meta: dict = field(default_factory=dict)

    def __len__(self):
        """Number of tritiles."""
        return len(self.tritiles)

    def __iter__(self):
        """Iterate over the tritiles."""
        return iter(self.tritiles)

    def time_hull(self):
        """Smallest interval containing every I_P, or None."""
        if not self.tritiles:
            return None
        return Interval.from_endpoints(
            min(tritile.time.left for tritile in self.tritiles),
            max(tritile.time.right for tritile in self.tritiles),
        )

    def subset(self, tritiles):
        """Collection with the same separation holding the given tritiles."""
        return Rank1Collection(list(tritiles), self.separation, dict(self.meta))

    def translate(self, periods):
        """Move every time interval by a whole number of its own lengths times periods.

        :param periods: integer multiple of the largest time length
        """
        largest = max(tritile.time.length for tritile in self.tritiles)
        moved = []
        for tritile in self.tritiles:
            steps = int(periods * largest / tritile.time.length)
            time = DyadicInterval(
                tritile.time.scale_k, tritile.time.offset_n + steps, tritile.time.grid_shift_j
            )
            moved.append(Tritile(time, tritile.freqs))
        return self.subset(moved)

    def modulate(self, shifts):
        """Shift the frequency intervals of component j by shifts[j]."""
        shifts = [as_fraction(shift) for shift in shifts]
        moved = [
            Tritile(
                tritile.time,
                tuple(freq.translate(shift) for freq, shift in zip(tritile.freqs, shifts)),
            )
            for tritile in self.tritiles
        ]
        return self.subset(moved)

    def to_json(self):
        """Serialize with exact coordinates."""
        return {
            "separation": self.separation,
            "tritiles": [tritile.to_json() for tritile in self.tritiles],
            "meta": self.meta,
        }

    @classmethod
    def from_json(cls, data):
        """Inverse of to_json."""
        return cls(
            [Tritile.from_json(item) for item in data["tritiles"]],
            int(data.get("separation", DEFAULT_SEPARATION)),
            dict(data.get("meta", {})),
        )


@dataclass
class ValidationReport:
    """Outcome of the rank 1 validation."""

    violations: list = field(default_factory=list)

    @property
    def valid(self):
        """True when no property is violated."""
        return not self.violations

    def __bool__(self):
        """Truth value of the report."""
        return self.valid


def _separated_lengths(first, second, separation):
    if first == second:
        return True
    ratio = max(first, second) / min(first, second)
    return ratio >= separation


def _pair_violations(first, second, separation):
    """Rank 1 violations between two tritiles, as a list of (property, component)."""
    found = []
    if first.time.length != second.time.length:
        if not _separated_lengths(first.time.length, second.time.length, separation):
            found.append(("a", None))
    same_time = first.time == second.time
    for j in range(3):
        own, other = first.freqs[j], second.freqs[j]
        overlapping = own.intersection(other) is not None
        if overlapping and not (own.contains(other) or other.contains(own)):
            found.append(("a", j))
            continue
        if not _separated_lengths(own.length, other.length, separation):
            found.append(("a", j))
        if same_time and overlapping:
            found.append(("b", j))
        if not overlapping or own.length == other.length:
            continue
        small, large = (first, second) if own.length < other.length else (second, first)
        if not dilate(large.hull, separation).contains(dilate(small.hull, separation)):
            found.append(("c", j))
        for k in range(3):
            if k != j and dilate(small.freqs[k], 3).intersection(dilate(large.freqs[k], 3)):
                found.append(("d", j))
                break
    return found


def validate_rank1(collection):
    """Check properties a to d of a rank 1 collection pairwise.

    Property c and d apply when one frequency interval is strictly contained in
    another, so equal intervals of distinct tritiles are allowed.

    :param collection: Rank1Collection
    :return: ValidationReport
    """
    report = ValidationReport()
    tritiles = collection.tritiles
    for i, first in enumerate(tritiles):
        for k in range(i + 1, len(tritiles)):
            for prop, component in _pair_violations(first, tritiles[k], collection.separation):
                report.violations.append({"property": prop, "pair": [i, k], "component": component})
    if report.violations:
        logger.debug(f"Rank 1 validation found {len(report.violations)} violations")
    return report


def _components_separated(tritile):
    tripled_freqs = [dilate(freq, 3) for freq in tritile.freqs]
    for j in range(3):
        for k in range(j + 1, 3):
            if tripled_freqs[j].intersection(tripled_freqs[k]) is not None:
                return False
    return True


def generate_rank1(
    seed=0,
    scales=range(-1, 1),
    density=1,
    separation=DEFAULT_SEPARATION,
    beta=DEFAULT_BETA,
    gamma=DEFAULT_GAMMA,
):
    """Generate a synthetic rank 1 collection on a lattice along gamma.

    At time scale g**l every dyadic interval of the window [0, g**max(l)) gets up
    to density tritiles. Component j is centered at t gamma_j + g |w| beta_j with
    t on a lattice of step g |w|, and snapped to the dyadic frequency interval of
    length |w| = 1/|I|. Candidates breaking the rank 1 properties are dropped.

    :param seed: random seed of the lattice offsets
    :param scales: iterable of integer scale exponents l
    :param density: tritiles attempted per time interval
    :param separation: g, a power of two above 3
    :param beta: nondegenerate unit direction
    :param gamma: unit direction of the singular line
    :return: Rank1Collection
    """
    separation = int(separation)
    if separation <= 3 or separation & (separation - 1):
        raise ValueError(f"Separation must be a power of two above 3, got {separation}")
    density = int(density)
    scales = sorted(int(scale) for scale in scales)
    if density < 1 or not scales:
        raise ValueError("Need a positive density and at least one scale")
    rng = np.random.default_rng(seed)
    exponent = separation.bit_length() - 1
    window = Fraction(separation) ** scales[-1]
    accepted, rejected = [], 0
    for scale in scales:
        length = Fraction(separation) ** scale
        width = 1 / length
        for offset in range(int(window / length)):
            time = DyadicInterval(exponent * scale, offset)
            for lattice in rng.permutation(np.arange(-density, density))[:density]:
                position = (lattice + 0.5) * separation * float(width)
                freqs = []
                for beta_j, gamma_j in zip(beta, gamma):
                    center = position * gamma_j + separation * float(width) * beta_j
                    freqs.append(Interval(width * math.floor(center / float(width)), width))
                candidate = Tritile(time, tuple(freqs))
                clean = _components_separated(candidate) and not any(
                    _pair_violations(candidate, other, separation) for other in accepted
                )
                if clean:
                    accepted.append(candidate)
                else:
                    rejected += 1
    if not accepted:
        raise ValueError(f"No tritile survives with density {density} and g={separation}")
    logger.info(f"Generated {len(accepted)} tritiles, {rejected} candidates dropped")
    meta = {"seed": seed, "scales": scales, "density": density, "rejected": rejected}
    return Rank1Collection(accepted, separation, meta)


def _bump(u):
    inside = np.abs(u) < 1
    values = np.zeros(np.shape(u))
    values[inside] = np.exp(-1.0 / (1.0 - u[inside] ** 2))
    return values


@dataclass(frozen=True)
class WavePacket:
    """Canonical packet of a tile sampled on a uniform grid."""

    tile: Tile
    origin: float
    step: float
    count: int
    normalization: str
    frequencies: np.ndarray = field(repr=False, compare=False)
    coefficients: np.ndarray = field(repr=False, compare=False)
    samples: np.ndarray = field(repr=False, compare=False)

    @property
    def midpoints(self):
        """Sample positions."""
        return self.origin + self.step * (np.arange(self.count) + 0.5)

    def norm2(self):
        """Discrete L2 norm."""
        return float(np.sqrt(self.step * np.sum(np.abs(self.samples) ** 2)))


@functools.lru_cache(maxsize=4096)
def _cached_packet(tile, origin, step, count, normalization):
    period = count * step
    center = float(tile.freq.center)
    width = float(tile.freq.length)
    spacing = 2 * math.pi / period
    low = math.ceil((center - PACKET_BAND * width / 2) / spacing)
    high = math.floor((center + PACKET_BAND * width / 2) / spacing)
    indices = np.arange(low, high + 1)
    frequencies = spacing * indices
    weights = _bump((frequencies - center) / (PACKET_BAND * width / 2))
    keep = weights > 0
    frequencies, weights = frequencies[keep], weights[keep]
    if frequencies.size == 0:
        raise ValueError(f"Frequency interval {tile.freq.to_json()} is below the resolution")
    if np.max(np.abs(frequencies)) >= math.pi / step:
        raise ValueError(f"Frequency interval {tile.freq.to_json()} exceeds the Nyquist limit")
    time_center = float(tile.time.center)
    coefficients = weights * np.exp(-1j * (frequencies - center) * time_center)
    points = origin + step * (np.arange(count) + 0.5)
    samples = np.exp(1j * np.outer(points, frequencies)) @ coefficients
    if normalization == "l1":
        # the modulus peaks at c(I), where every term has the same phase
        scale = 1.0 / (float(tile.time.length) * np.sum(weights))
    elif normalization == "l2":
        scale = 1.0 / math.sqrt(step * np.sum(np.abs(samples) ** 2))
    else:
        raise ValueError(f"Normalization must be 'l1' or 'l2', got '{normalization}'")
    return WavePacket(
        tile, origin, step, count, normalization, frequencies, coefficients * scale, samples * scale
    )


def build_wave_packet(tile, grid, normalization="l1"):
    """Build the canonical packet of a tile on the grid of a sampled function.

    The Fourier transform is a smooth bump on the discrete frequencies inside
    the middle 80% of the frequency interval.

    :param tile: Tile
    :param grid: SampledFunction whose grid carries the packet
    :param normalization: "l1" for sup |phi| = 1/|I|, "l2" for unit L2 norm
    :return: WavePacket
    """
    return _cached_packet(tile, grid.origin, grid.step, grid.size, normalization)


def adaptation_constants(packet, max_order=4):
    """Measure A_N for N up to max_order.

    The supremum runs over one period of the discrete packet centered at c(I).

    :param packet: WavePacket
    :param max_order: largest N
    :return: list of A_0 .. A_N
    """
    length = float(packet.tile.time.length)
    center = float(packet.tile.time.center)
    offsets = packet.step * (np.arange(packet.count) - packet.count // 2)
    points = center + offsets
    shifted = packet.frequencies - float(packet.tile.freq.center)
    phases = np.exp(1j * np.outer(points, shifted))
    chi = 1.0 / (1.0 + (offsets / length) ** 2)
    derivatives = [
        np.abs(phases @ (packet.coefficients * (1j * shifted) ** n)) * length ** (n + 1)
        for n in range(max_order + 1)
    ]
    constants = []
    for order in range(max_order + 1):
        weight = chi ** (-order)
        constants.append(max(float(np.max(derivatives[n] * weight)) for n in range(order + 1)))
    return constants


def packet_csv(packet):
    """Export packet samples as CSV text with columns x, real, imag, abs."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["x", "real", "imag", "abs"])
    for x, value in zip(packet.midpoints, packet.samples):
        row = (x, value.real, value.imag, abs(value))
        writer.writerow([f"{item:.12g}" for item in row])
    return buffer.getvalue()


def tritile_map(f, tritile, j, normalization="l1"):
    """Evaluate F_j(f)(P) = |<f, phi_{P_j}>| with the canonical packet.

    :param f: SampledFunction
    :param tritile: Tritile
    :param j: component index 0, 1 or 2
    :return: float
    """
    packet = build_wave_packet(tritile.tile(j), f, normalization)
    return float(abs(f.step * np.sum(f.values * np.conj(packet.samples))))


def tritile_maps(f, collection, j, normalization="l1"):
    """Evaluate F_j(f) on every tritile of a collection, in order."""
    return np.array([tritile_map(f, tritile, j, normalization) for tritile in collection])


def tritile_form(collection, functions, normalization="l1"):
    """Evaluate the sum over P of |I_P| times the product of F_j(f_j)(P).

    :param collection: Rank1Collection or iterable of Tritile
    :param functions: three SampledFunction objects
    :return: float
    """
    total = 0.0
    for tritile in collection:
        term = float(tritile.time.length)
        for j, f in enumerate(functions):
            term *= tritile_map(f, tritile, j, normalization)
            if term == 0:
                break
        total += term
    return total


def restrict(collection, interval, mode="leq"):
    """Filter a collection by its time intervals.

    :param collection: Rank1Collection
    :param interval: Interval
    :param mode: "leq" keeps I_P inside the interval, "eq" keeps I_P equal to it
    :return: Rank1Collection
    """
    interval = interval.interval if isinstance(interval, DyadicInterval) else interval
    if mode == "leq":
        keep = [tritile for tritile in collection if interval.contains(tritile.interval)]
    elif mode == "eq":
        keep = [tritile for tritile in collection if tritile.interval == interval]
    else:
        raise ValueError(f"Mode must be 'leq' or 'eq', got '{mode}'")
    return collection.subset(keep)


def good_set(collection, stopping):
    """Remove every tritile whose time interval lies in a stopping interval."""
    stopping = [item.interval if isinstance(item, DyadicInterval) else item for item in stopping]
    keep = [
        tritile
        for tritile in collection
        if not any(interval.contains(tritile.interval) for interval in stopping)
    ]
    return collection.subset(keep)


@dataclass(frozen=True)
class Tree:
    """Tritiles with top data (I_T, xi_T)."""

    members: tuple
    top_interval: Interval
    top_frequency: Fraction

    def __post_init__(self):
        """Check that every member sits under the top."""
        object.__setattr__(self, "members", tuple(self.members))
        object.__setattr__(self, "top_frequency", as_fraction(self.top_frequency))
        for tritile in self.members:
            if not self.top_interval.contains(tritile.interval):
                raise ValueError(f"Time interval {tritile.interval.to_json()} is outside the top")
            if not _hull_contains(tritile, self.top_frequency):
                raise ValueError(f"Top frequency {self.top_frequency} is outside a tritile hull")

    def __len__(self):
        """Number of members."""
        return len(self.members)


def _hull_contains(tritile, xi):
    hull = tritile.hull
    return hull.left <= xi < hull.right


def maximal_tree(collection, top_interval, top_frequency):
    """The largest tree of a collection with the given top data."""
    top_frequency = as_fraction(top_frequency)
    members = [
        tritile
        for tritile in collection
        if top_interval.contains(tritile.interval) and _hull_contains(tritile, top_frequency)
    ]
    return Tree(members, top_interval, top_frequency)


def tree_split(tree):
    """Return T_1, T_2, T_3 where T_j holds the members with xi_T in w_{P_j}."""
    parts = []
    for j in range(3):
        members = [
            tritile
            for tritile in tree.members
            if tritile.freqs[j].left <= tree.top_frequency < tritile.freqs[j].right
        ]
        parts.append(Tree(members, tree.top_interval, tree.top_frequency))
    return tuple(parts)


def check_tree_split(tree):
    """Check the covering and disjointness properties of the tree split.

    :param tree: Tree
    :return: dict with flags "covers" and "disjoint" and a list of violations
    """
    parts = tree_split(tree)
    violations = []
    for tritile in tree.members:
        owners = [j for j, part in enumerate(parts) if tritile in part.members]
        if len(owners) > 1:
            violations.append({"kind": "cover", "tritile": tritile.to_json(), "parts": owners})
    for j, part in enumerate(parts):
        for k in range(3):
            if k == j:
                continue
            tripled_freqs = sorted(
                {dilate(tritile.freqs[k], 3) for tritile in part.members},
                key=lambda item: item.left,
            )
            for first, second in zip(tripled_freqs, tripled_freqs[1:]):
                if first.intersection(second) is not None:
                    pair = [first.to_json(), second.to_json()]
                    violations.append({"kind": "disjoint", "part": j, "component": k, "pair": pair})
    covers = not any(item["kind"] == "cover" for item in violations)
    disjoint = not any(item["kind"] == "disjoint" for item in violations)
    return {"covers": covers, "disjoint": disjoint, "violations": violations}


def enumerate_trees(collection, levels=4):
    """List the distinct maximal trees over candidate tops.

    Tops are (I, xi) with I a dyadic ancestor, at most levels generations up, of
    some I_P and xi the center of some w_{P_j}.

    :param collection: Rank1Collection
    :param levels: number of ancestor generations
    :return: list of Tree, smallest top interval first; a member set met again keeps its first top
    """
    tritiles = list(collection)
    if not tritiles:
        return []
    lefts = np.array([float(tritile.time.left) for tritile in tritiles])
    rights = np.array([float(tritile.time.right) for tritile in tritiles])
    hull_lefts = np.array([float(tritile.hull.left) for tritile in tritiles])
    hull_rights = np.array([float(tritile.hull.right) for tritile in tritiles])
    frequencies = sorted({freq.center for tritile in tritiles for freq in tritile.freqs})
    xis = np.array([float(xi) for xi in frequencies])
    freq_masks = (hull_lefts[None, :] <= xis[:, None]) & (xis[:, None] < hull_rights[None, :])

    tops = set()
    for tritile in tritiles:
        node = tritile.time
        for _ in range(levels + 1):
            tops.add(node)
            node = node.parent()

    seen = {}
    for node in sorted(tops, key=lambda item: (item.length, item.left)):
        left, right = node.interval.bounds()
        time_mask = (lefts >= left) & (rights <= right)
        for row, xi in zip(freq_masks, frequencies):
            mask = row & time_mask
            if not mask.any():
                continue
            key = mask.tobytes()
            if key not in seen:
                members = [tritiles[i] for i in np.flatnonzero(mask)]
                seen[key] = Tree(members, node.interval, xi)
    logger.debug(f"Enumerated {len(seen)} distinct trees from {len(tops)} top intervals")
    return list(seen.values())


def almost_localized_check(collection, interval, suite, order=LOCALIZATION_ORDER):
    """Measure the two almost localization ratios on P_=(J).

    :param collection: Rank1Collection
    :param interval: time interval J
    :param suite: list of SampledFunction
    :param order: exponent M of the chi weights
    :return: dict with the maximal sup ratio and l2 ratio, and skipped count
    """
    level = restrict(collection, interval, "eq")
    report = {"tritiles": len(level), "sup_ratio": 0.0, "l2_ratio": 0.0, "skipped": 0}
    for f in suite:
        l1 = weighted_local_norm(f, interval, order, 1)
        l2 = weighted_local_norm(f, interval, order, 2)
        if l1 == 0 or l2 == 0 or not len(level):
            report["skipped"] += 1
            continue
        for j in range(3):
            values = tritile_maps(f, level, j)
            # |I_P| = |J| on P_=(J)
            energy = math.sqrt(np.sum(values**2))
            report["sup_ratio"] = max(report["sup_ratio"], float(values.max()) / l1)
            report["l2_ratio"] = max(report["l2_ratio"], energy / l2)
    return report


def _tail_inputs(functions, interval, types):
    tripled_interval = dilate(interval, 3)
    result = []
    for f, kind in zip(functions, types):
        inside = restrict_function(f, tripled_interval)
        if kind == "in":
            result.append(inside)
        elif kind == "out":
            result.append(f.with_values(f.values - inside.values))
        else:
            raise ValueError(f"Tail type must be 'in' or 'out', got '{kind}'")
    return result


def tail_form(collection, interval, functions, types):
    """Evaluate the form of P_<=(I) on f_j restricted to 3I ("in") or its complement ("out")."""
    interval = interval.interval if isinstance(interval, DyadicInterval) else interval
    local = restrict(collection, interval, "leq")
    return tritile_form(local, _tail_inputs(functions, interval, types))


def tail_bound_check(collection, interval, functions, exponents, types, mode="full"):
    """Compare a tail form with |I| times the product of inf over 3I of M_{p_j} f_j.

    :return: dict with the form, the bound and their ratio
    """
    if "out" not in types:
        raise ValueError("The bound check needs at least one 'out' component")
    interval = interval.interval if isinstance(interval, DyadicInterval) else interval
    value = tail_form(collection, interval, functions, types)
    bound = float(interval.length)
    for f, p in zip(functions, exponents):
        bound *= inf_maximal_on(f, float(p), interval, mode)
    ratio = 0.0 if value == 0 else (math.inf if bound == 0 else value / bound)
    return {"form": value, "bound": bound, "ratio": ratio}


def sparse_collections_for(functions, exponents, mode="full"):
    """Build one sparse collection per grid type from the inputs alone."""
    return {
        grid_shift: build_sparse(functions, exponents, grid_shift, mode) for grid_shift in (0, 1, 2)
    }


def domination_check(collection, functions, exponents, collections=None, mode="full"):
    """Compare the tritile form with the sparse form of the tripled collection.

    The collection is split by the grid type of the three-grid embedding of I_P.
    One sparse collection per grid type is built from the inputs, and the type
    whose sparse form is largest gives the reported collection {3Q}. The choice
    does not depend on the tritiles, so every collection checked against the
    same inputs shares it.

    :param collection: Rank1Collection
    :param functions: three SampledFunction objects on a common grid
    :param exponents: open admissible ExponentTuple
    :param collections: optional precomputed result of sparse_collections_for
    :return: dict report
    :raises DominationError: if the tritile form is positive and the sparse form vanishes
    """
    if collections is None:
        collections = sparse_collections_for(functions, exponents, mode)
    sums = {
        grid_type: psf_eval(SparseFormSpec(exponents, sparse), functions)
        for grid_type, sparse in collections.items()
    }
    groups = type_split([tritile.interval for tritile in collection])
    per_type = {}
    for grid_type, items in groups.items():
        intervals = {item[0] for item in items}
        members = [tritile for tritile in collection if tritile.interval in intervals]
        per_type[grid_type] = {
            "tritiles": len(members),
            "form": tritile_form(members, functions),
            "psf": sums[grid_type],
        }
    chosen = max(sums, key=lambda grid_type: (sums[grid_type], -grid_type))
    sparse = tripled(collections[chosen])
    rhs = psf_eval(SparseFormSpec(exponents, sparse), functions)
    lhs = tritile_form(collection, functions)
    if lhs > 0 and rhs == 0:
        raise DominationError(f"Tritile form {lhs} is positive while the sparse form vanishes")
    ratio = 0.0 if lhs == 0 else lhs / rhs
    logger.debug(f"Domination ratio {ratio:.6g} using grid type {chosen}")
    return {
        "form": lhs,
        "psf": rhs,
        "ratio": ratio,
        "grid_type": chosen,
        "per_type": per_type,
        "collection_digest": collection_digest(sparse),
        "sparse": sparse,
    }
