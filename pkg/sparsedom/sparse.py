# vim: set filetype=python ts=4 sw=4
# -*- coding: utf-8 -*-
"""Stopping intervals, the iterated sparse construction and sparse forms.

Tasks include:
1. Selecting maximal dyadic stopping intervals inside a superlevel set of M_p
2. Iterating the selection into a sparse collection with certified major subsets
3. Evaluating positive sparse forms and the up-type norm comparison

"""
from dataclasses import dataclass
from dataclasses import field
from fractions import Fraction
import hashlib
import json
import logging

import numpy as np
from sparsedom.grid import as_exponent
from sparsedom.grid import ceil_log2
from sparsedom.grid import dilate
from sparsedom.grid import DyadicInterval
from sparsedom.grid import ExponentTuple
from sparsedom.grid import INF
from sparsedom.grid import Interval
from sparsedom.grid import is_admissible
from sparsedom.grid import reciprocal
from sparsedom.grid import three_grid_embed
from sparsedom.signals import local_average
from sparsedom.signals import lp_norm
from sparsedom.signals import maximal_profile
from sparsedom.signals import restrict

logger = logging.getLogger(__name__)

STOPPING_PACKING = Fraction(1, 6)
MERGED_PACKING = Fraction(1, 2)
CONSTRUCTION_ETA = Fraction(1, 2)
TRIPLED_ETA = Fraction(1, 6)
MAX_DOUBLINGS = 8
MAX_DEPTH = 64


class PackingError(ValueError):
    """Stopping intervals cover more than the allowed share of their parent."""

    def __init__(self, ratio, threshold):
        """Keep the measured ratio and the threshold constant that produced it."""
        super().__init__(f"Packing ratio {float(ratio):.6f} exceeds 1/6 at C={threshold:.6g}")
        self.ratio = ratio
        self.threshold = threshold


class ConstructionError(RuntimeError):
    """The iterated construction did not terminate."""


class CertificationError(ValueError):
    """Major subsets cannot be found at the requested sparseness."""

    def __init__(self, interval, ratio, eta):
        """Keep the worst interval and its achieved ratio."""
        super().__init__(
            f"Interval {interval.to_json()} only reaches |E_I|/|I| = {ratio} below {eta}"
        )
        self.interval = interval
        self.ratio = ratio
        self.eta = eta


def default_threshold(p):
    """Threshold constant 36**(1/p)."""
    return 36.0 ** (1.0 / float(p))


@dataclass
class StoppingFamily:
    """Maximal stopping intervals of one function inside Q."""

    parent: DyadicInterval
    members: list
    threshold: float
    ratio: Fraction = Fraction(0)


def _as_interval(item):
    return item.interval if isinstance(item, DyadicInterval) else item


def packing_ratio(intervals, parent):
    """Exact ratio of the summed lengths to the length of the parent."""
    parent = _as_interval(parent)
    total = sum((_as_interval(item).length for item in intervals), Fraction(0))
    return total / parent.length


def stopping_intervals(f, p, parent, threshold=None, mode="full"):
    """Select maximal dyadic I inside Q with M_p(f 1_3Q) > C <f>_{3Q,p} on I.

    The superlevel set is judged at cell midpoints, and the recursion stops at
    intervals shorter than the sample step.

    :param f: SampledFunction
    :param p: finite exponent, at least one
    :param parent: DyadicInterval Q
    :param threshold: constant C, defaults to 36**(1/p)
    :param mode: maximal function mode
    :return: StoppingFamily
    :raises PackingError: if the members cover more than |Q|/6
    """
    p = float(as_exponent(p))
    threshold = default_threshold(p) if threshold is None else float(threshold)
    tripled = dilate(parent, 3)
    local = restrict(f, tripled)
    level = threshold * local_average(local, tripled, p)
    family = StoppingFamily(parent, [], threshold)
    if level == 0:
        return family

    points, values = maximal_profile(local, p, mode, parent.interval)
    above = np.concatenate(([0], np.cumsum(values > level)))

    def counts(node):
        left, right = node.interval.bounds()
        first, last = np.searchsorted(points, [left, right], side="left")
        return last - first, above[last] - above[first]

    pending = [parent]
    while pending:
        node = pending.pop()
        total, hits = counts(node)
        if hits == 0:
            continue
        if hits == total:
            family.members.append(node)
        elif float(node.length) / 2 >= local.step:
            pending.extend(node.children())

    family.members.sort()
    family.ratio = packing_ratio(family.members, parent)
    logger.debug(
        f"Stopping on {parent.interval.to_json()}: {len(family.members)} intervals, "
        f"ratio {float(family.ratio):.4f}"
    )
    if family.ratio > STOPPING_PACKING:
        raise PackingError(family.ratio, threshold)
    return family


def maximal_elements(intervals):
    """Drop every interval contained in another one of the list."""
    def position(item):
        return _as_interval(item).left, -_as_interval(item).length

    unique = sorted(set(intervals), key=position)
    result = []
    for item in unique:
        if result and _as_interval(result[-1]).contains(_as_interval(item)):
            continue
        result.append(item)
    return result


def merge_stopping(families):
    """Merge the stopping families of the three functions.

    :param families: StoppingFamily objects sharing the same parent
    :return: maximal elements of the union, pairwise disjoint
    """
    families = list(families)
    if not families:
        return []
    parent = families[0].parent
    if any(family.parent != parent for family in families):
        raise ValueError("Stopping families must share their parent interval")
    merged = maximal_elements([member for family in families for member in family.members])
    ratio = packing_ratio(merged, parent)
    if ratio > MERGED_PACKING:
        raise PackingError(ratio, max(family.threshold for family in families))
    return merged


def _subtract(interval, pieces):
    """Return interval minus a union of intervals as a sorted list of intervals."""
    remaining = [interval]
    for piece in pieces:
        updated = []
        for part in remaining:
            if part.intersection(piece) is None:
                updated.append(part)
                continue
            if part.left < piece.left:
                updated.append(Interval.from_endpoints(part.left, piece.left))
            if piece.right < part.right:
                updated.append(Interval.from_endpoints(piece.right, part.right))
        remaining = updated
    return sorted(remaining, key=lambda item: item.left)


def _measure(pieces):
    return sum((piece.length for piece in pieces), Fraction(0))


@dataclass
class SparseCollection:
    """Intervals with pairwise disjoint major subsets E_I."""

    intervals: list
    major_subsets: list
    eta: Fraction
    trace: list = field(default_factory=list)
    info: dict = field(default_factory=dict)

    def __len__(self):
        """Number of intervals."""
        return len(self.intervals)

    def achieved_eta(self):
        """Smallest ratio |E_I| / |I| over the collection."""
        if not self.intervals:
            return Fraction(1)
        return min(
            _measure(subset) / interval.length
            for interval, subset in zip(self.intervals, self.major_subsets)
        )

    def to_json(self):
        """Serialize with exact rational endpoints."""
        return {
            "intervals": [interval.to_json() for interval in self.intervals],
            "major_subsets": [
                [piece.to_json() for piece in subset] for subset in self.major_subsets
            ],
            "eta": str(self.eta),
            "trace": self.trace,
            "info": self.info,
        }

    @classmethod
    def from_json(cls, data):
        """Inverse of to_json."""
        return cls(
            intervals=[Interval.from_json(pair) for pair in data["intervals"]],
            major_subsets=[
                [Interval.from_json(pair) for pair in subset] for subset in data["major_subsets"]
            ],
            eta=Fraction(data["eta"]),
            trace=list(data.get("trace", [])),
            info=dict(data.get("info", {})),
        )


def collection_digest(collection):
    """Return the sha256 hex digest of the intervals and major subsets."""
    payload = {
        "intervals": [interval.to_json() for interval in collection.intervals],
        "major_subsets": [
            [piece.to_json() for piece in subset] for subset in collection.major_subsets
        ],
    }
    text = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def _laminar_parents(intervals):
    """Immediate parent index for each interval, or None when the family is not laminar."""
    order = sorted(range(len(intervals)), key=lambda i: (intervals[i].left, -intervals[i].length))
    parents = [None] * len(intervals)
    stack = []
    for index in order:
        current = intervals[index]
        while stack and intervals[stack[-1]].right <= current.left:
            stack.pop()
        if stack:
            top = intervals[stack[-1]]
            if current.right > top.right:
                return None
            parents[index] = stack[-1]
        stack.append(index)
    return parents


def certify_sparseness(intervals, eta):
    """Construct disjoint major subsets and check |E_I| >= eta |I|.

    Laminar families use E_I = I minus its immediate children. Other families are
    disjointified greedily from the shortest interval up.

    :param intervals: list of Interval or DyadicInterval
    :param eta: requested sparseness in (0, 1]
    :return: SparseCollection
    :raises CertificationError: naming the worst interval
    """
    eta = Fraction(eta)
    if not 0 < eta <= 1:
        raise ValueError(f"Sparseness must lie in (0, 1], got {eta}")
    intervals = [_as_interval(item) for item in intervals]
    parents = _laminar_parents(intervals)
    subsets = [None] * len(intervals)
    if parents is not None:
        children = [[] for _ in intervals]
        for index, parent in enumerate(parents):
            if parent is not None:
                children[parent].append(intervals[index])
        for index, interval in enumerate(intervals):
            subsets[index] = _subtract(interval, children[index])
        method = "laminar"
    else:
        taken = []
        for index in sorted(range(len(intervals)), key=lambda i: intervals[i].length):
            subsets[index] = _subtract(intervals[index], taken)
            taken.extend(subsets[index])
        method = "greedy"

    collection = SparseCollection(intervals, subsets, eta, info={"method": method})
    for interval, subset in zip(intervals, subsets):
        ratio = _measure(subset) / interval.length
        if ratio < eta:
            worst = min(
                zip(intervals, subsets), key=lambda pair: _measure(pair[1]) / pair[0].length
            )
            raise CertificationError(worst[0], _measure(worst[1]) / worst[0].length, eta)
    logger.debug(f"Certified {len(intervals)} intervals at eta={eta} ({method})")
    return collection


def tripled(collection):
    """Return {3I} with the same major subsets, certified at eta = 1/6."""
    intervals = [dilate(interval, 3) for interval in collection.intervals]
    result = SparseCollection(
        intervals,
        [list(subset) for subset in collection.major_subsets],
        collection.eta / 3,
        trace=list(collection.trace),
        info=dict(collection.info, tripled=True),
    )
    if result.achieved_eta() < TRIPLED_ETA:
        raise CertificationError(intervals[0], result.achieved_eta(), TRIPLED_ETA)
    result.eta = TRIPLED_ETA
    return result


def type_split(intervals):
    """Group intervals by the grid type of their three-grid embedding.

    :param intervals: list of Interval
    :return: dict mapping grid type to a list of (interval, embedded DyadicInterval)
    """
    groups = {0: [], 1: [], 2: []}
    for interval in intervals:
        embedded, grid_type = three_grid_embed(_as_interval(interval))
        groups[grid_type].append((interval, embedded))
    return groups


def reduced_exponents(exponents):
    """Lower entries of at least 2 below 2, keeping the tuple open admissible.

    Averages grow with p, so a sparse bound with the reduced tuple implies the
    bound with the original one. Half of the slack epsilon is spent on the
    lowered entries.

    :param exponents: open admissible ExponentTuple
    :return: ExponentTuple with every entry below 2
    """
    lowered = [index for index, p in enumerate(exponents) if p is INF or p >= 2]
    if not lowered:
        return exponents
    share = exponents.epsilon() / (2 * len(lowered))
    values = list(exponents)
    for index in lowered:
        values[index] = 1 / (Fraction(1, 2) + share)
    return ExponentTuple(*values)


def _hull(functions):
    hulls = [f.support_hull() for f in functions]
    hulls = [hull for hull in hulls if hull is not None]
    if not hulls:
        return None
    left = min(hull.left for hull in hulls)
    right = max(hull.right for hull in hulls)
    return Interval.from_endpoints(left, right)


def root_intervals(functions, grid_shift=0):
    """Intervals of the chosen grid at the least scale 2**K >= |hull| meeting the hull.

    Each root Q satisfies hull within 3Q. A vanishing input gives the unit root.

    :param functions: SampledFunction objects
    :param grid_shift: grid index j
    :return: list of one or two DyadicInterval
    """
    hull = _hull(functions)
    if hull is None:
        return [DyadicInterval(0, 0, grid_shift)]
    scale_k = ceil_log2(hull.length)
    first = DyadicInterval.containing(hull.left, scale_k, grid_shift)
    roots = [first]
    if first.right < hull.right:
        roots.append(DyadicInterval(scale_k, first.offset_n + 1, grid_shift))
    return roots


def _stopping_with_doubling(f, p, node, mode, thresholds, index, warnings):
    threshold = thresholds[index]
    for _ in range(MAX_DOUBLINGS + 1):
        try:
            family = stopping_intervals(f, p, node, threshold, mode)
            thresholds[index] = threshold
            return family
        except PackingError as err:
            message = (
                f"Packing ratio {float(err.ratio):.4f} for function {index + 1}, "
                f"doubling C from {threshold:.6g}"
            )
            logger.warning(message)
            warnings.append(message)
            threshold *= 2
    raise ConstructionError(f"Threshold doubling did not restore packing for function {index + 1}")


def build_sparse(functions, exponents, grid_shift=0, mode="full", max_depth=MAX_DEPTH):
    """Run the iterated stopping time construction.

    :param functions: three SampledFunction objects
    :param exponents: open admissible ExponentTuple
    :param grid_shift: grid index j of the roots and of every stopping interval
    :param mode: maximal function mode
    :param max_depth: generation limit
    :return: SparseCollection certified at eta = 1/2
    :raises ConstructionError: if the generation limit is exceeded
    """
    functions = list(functions)
    if len(functions) != 3:
        raise ValueError(f"Expected three functions, got {len(functions)}")
    if not is_admissible(exponents, open_tuple=True):
        raise ValueError(f"Exponent tuple {exponents.to_json()} is not open admissible")
    working = reduced_exponents(exponents)
    powers = [float(p) for p in working]
    thresholds = [default_threshold(p) for p in powers]
    smallest_step = min(f.step for f in functions)
    warnings = []

    nodes = []
    trace = []
    generation_ratios = []
    pending = [(root, None, 0) for root in root_intervals(functions, grid_shift)]
    while pending:
        node, parent_index, depth = pending.pop(0)
        if depth > max_depth:
            raise ConstructionError(f"Generation limit {max_depth} exceeded")
        index = len(nodes)
        nodes.append(node)
        trace.append(
            {"interval": node.interval.to_json(), "parent": parent_index, "generation": depth}
        )
        if float(node.length) < smallest_step:
            continue
        families = [
            _stopping_with_doubling(f, p, node, mode, thresholds, j, warnings)
            for j, (f, p) in enumerate(zip(functions, powers))
        ]
        children = merge_stopping(families)
        if children:
            generation_ratios.append(float(packing_ratio(children, node)))
        pending.extend((child, index, depth + 1) for child in children)

    collection = certify_sparseness(nodes, CONSTRUCTION_ETA)
    collection.trace = trace
    collection.info.update(
        {
            "grid_shift": grid_shift,
            "exponents": exponents.to_json(),
            "working_exponents": working.to_json(),
            "thresholds": thresholds,
            "max_generation_ratio": max(generation_ratios, default=0.0),
            "generations": max((item["generation"] for item in trace), default=0) + 1,
            "warnings": warnings,
        }
    )
    logger.info(
        f"Sparse collection on grid {grid_shift}: {len(nodes)} intervals in "
        f"{collection.info['generations']} generations"
    )
    return collection


@dataclass
class SparseFormSpec:
    """Exponent tuple and sparse collection of a positive sparse form."""

    exponents: ExponentTuple
    collection: object

    def __post_init__(self):
        """Reject infinite exponents."""
        if not self.exponents.is_finite():
            raise ValueError("Sparse forms need finite exponents")


def psf_eval(spec, functions):
    """Evaluate sum over I of |I| times the product of <f_j>_{I,p_j}.

    :param spec: SparseFormSpec, whose collection is a SparseCollection or a list
    :param functions: three SampledFunction objects
    :return: float
    """
    intervals = getattr(spec.collection, "intervals", spec.collection)
    total = 0.0
    for interval in intervals:
        interval = _as_interval(interval)
        term = float(interval.length)
        for f, p in zip(functions, spec.exponents):
            term *= local_average(f, interval, p)
            if term == 0:
                break
        total += term
    return total


def sparse_form_sup(functions, exponents, mode="full"):
    """Largest PSF over the three grid constructions, with the collections used."""
    best, collections = 0.0, []
    for grid_shift in (0, 1, 2):
        collection = build_sparse(functions, exponents, grid_shift, mode)
        collections.append(collection)
        best = max(best, psf_eval(SparseFormSpec(exponents, collection), functions))
    return best, collections


def _dual_exponent(r):
    if r == 1:
        return INF
    return r / (r - 1)


def _trilinear(t_values, f3_values, step):
    return abs(step * np.sum(t_values * f3_values))


def uptype_bound_check(f1, f2, q1, q2, exponents, constant, bilinear, seed=0, trials=8):
    """Compare ||T(f1, f2)||_r with its duality and sparse estimates.

    T is the bilinear operator whose pairing with f3 is the trilinear form. The
    dual side tests the extremal f3 and a random family; the sparse side bounds
    each pairing by K times the largest PSF over the three grids.

    :param f1: SampledFunction
    :param f2: SampledFunction on the same grid
    :param q1: exponent
    :param q2: exponent
    :param exponents: ExponentTuple with p1 < q1, p2 < q2 and p3 < r'
    :param constant: sparse domination constant K
    :param bilinear: callable (f1, f2) -> SampledFunction
    :param seed: random seed of the test family
    :param trials: number of random test functions
    :return: dict report
    """
    q1, q2 = as_exponent(q1), as_exponent(q2)
    if q1 is INF and q2 is INF:
        raise ValueError("At least one of q1, q2 must be finite")
    inverse_r = reciprocal(q1) + reciprocal(q2)
    r = 1 / inverse_r
    r_dual = _dual_exponent(r) if r >= 1 else None
    p1, p2, p3 = exponents
    if not (q1 is INF or p1 < q1) or not (q2 is INF or p2 < q2):
        raise ValueError("Need p1 < q1 and p2 < q2")
    if r_dual is not None and r_dual is not INF and not p3 < r_dual:
        raise ValueError(f"Need p3 < r' = {r_dual}")

    product = bilinear(f1, f2)
    norm = lp_norm(product, r)
    input_norm = lp_norm(f1, q1) * lp_norm(f2, q2)
    report = {
        "r": str(r),
        "norm": norm,
        "input_norm": input_norm,
        "dual_estimate": 0.0,
        "sparse_estimate": 0.0,
        "domination_ratio": 0.0,
        "ratio": 0.0 if norm == 0 else norm / input_norm,
        "tests": 0,
    }
    if norm == 0 or r_dual is None:
        return report

    rng = np.random.default_rng(seed)
    magnitude = np.abs(product.values)
    safe = np.where(magnitude > 0, magnitude, 1)
    phase = np.where(magnitude > 0, np.conj(product.values) / safe, 0)
    if r_dual is INF:
        extremal = phase
    else:
        extremal = magnitude ** (float(r) - 1) * phase
    candidates = [extremal]
    for _ in range(trials):
        candidates.append(rng.normal(size=product.size) + 1j * rng.normal(size=product.size))

    for values in candidates:
        f3 = product.with_values(values)
        size = lp_norm(f3, r_dual)
        if size == 0:
            continue
        pairing = _trilinear(product.values, f3.values, product.step)
        sparse, _ = sparse_form_sup([f1, f2, f3], exponents)
        report["dual_estimate"] = max(report["dual_estimate"], pairing / size)
        report["sparse_estimate"] = max(report["sparse_estimate"], constant * sparse / size)
        if sparse > 0:
            ratio = pairing / (constant * sparse)
            report["domination_ratio"] = max(report["domination_ratio"], ratio)
        report["tests"] += 1
    logger.info(
        f"Up-type check: norm {norm:.6g}, dual {report['dual_estimate']:.6g}, "
        f"sparse {report['sparse_estimate']:.6g}"
    )
    return report


def uptype_refinement_check(
    make_inputs, resolution, q1, q2, exponents, constant, bilinear, tolerance=0.2
):
    """Repeat the up-type check at resolution and twice the resolution.

    :param make_inputs: callable resolution -> (f1, f2)
    :return: dict with both reports and a pass flag for ratios within tolerance
    """
    reports = []
    for level in (resolution, 2 * resolution):
        f1, f2 = make_inputs(level)
        reports.append(uptype_bound_check(f1, f2, q1, q2, exponents, constant, bilinear, trials=2))
    coarse, fine = reports[0]["ratio"], reports[1]["ratio"]
    stable = coarse == fine == 0 or (coarse > 0 and abs(fine - coarse) <= tolerance * coarse)
    return {"reports": reports, "pass": bool(stable)}
