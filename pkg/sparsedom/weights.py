# vim: set filetype=python ts=4 sw=4
# -*- coding: utf-8 -*-
"""Muckenhoupt, reverse Hoelder and multilinear weight constants.

Suprema over intervals run over the subintervals of the sampled domain whose
endpoints lie on the cell boundaries, thinned to a stride on long grids. They
are lower bounds for the constants over all intervals.
"""
from fractions import Fraction
import logging
import math

import numpy as np
from scipy import optimize
from sparsedom.grid import as_exponent
from sparsedom.grid import as_fraction
from sparsedom.grid import ExponentTuple
from sparsedom.grid import HolderTuple
from sparsedom.grid import INF
from sparsedom.grid import is_admissible
from sparsedom.signals import dyadic_weighted_maximal
from sparsedom.signals import lp_norm
from sparsedom.sparse import psf_eval
from sparsedom.sparse import SparseFormSpec

logger = logging.getLogger(__name__)

# Endpoints of the candidate intervals, at most this many per weight.
MAX_ENDPOINTS = 513
WEIGHT_TOLERANCE = 1e-8
EPSILON_CEILING = Fraction(1, 4)
EPSILON_BUDGET = 2.0


class AqcorError(RuntimeError):
    """No epsilon in the search range keeps the powered weights in budget."""


class Weight:
    """Strictly positive sampled weight."""

    def __init__(self, function):
        """Wrap a sampled function with positive finite values.

        :param function: SampledFunction
        """
        values = np.asarray(function.values)
        if np.iscomplexobj(values) or not np.all(values > 0):
            raise ValueError("Weight values must be real and strictly positive")
        self.function = function

    @property
    def values(self):
        """Sample values."""
        return self.function.values

    def power(self, exponent):
        """Return v**exponent as a Weight, refusing overflow."""
        with np.errstate(over="ignore", divide="ignore"):
            values = self.values ** float(exponent)
        if not np.all(np.isfinite(values)) or not np.all(values > 0):
            raise ValueError(f"v**{float(exponent):.6g} is not integrable on the grid")
        return Weight(self.function.with_values(values))

    def __mul__(self, other):
        """Pointwise product."""
        return Weight(self.function.with_values(self.values * other.values))

    def scaled(self, factor):
        """Multiply by a positive constant."""
        return Weight(self.function.with_values(self.values * float(factor)))


class WeightVector:
    """Weights v_1, v_2, v_3 with the product of v_j**(1/q_j) equal to one."""

    def __init__(self, v1, v2, v3, holder):
        """Check the grids and the product condition.

        :param holder: HolderTuple with finite entries
        """
        weights = (v1, v2, v3)
        if not all(weight.function.same_grid(v1.function) for weight in weights):
            raise ValueError("Weights must share one grid")
        if not all(q is not INF for q in holder):
            raise ValueError("Weight vectors need finite exponents")
        log_product = sum(np.log(weight.values) / float(q) for weight, q in zip(weights, holder))
        if np.max(np.abs(log_product)) > WEIGHT_TOLERANCE:
            raise ValueError("The product of v_j**(1/q_j) must equal one")
        self.weights = weights
        self.holder = holder

    def __iter__(self):
        """Iterate over the weights."""
        return iter(self.weights)

    @classmethod
    def completed(cls, v1, v2, q1, q2):
        """Complete v_1, v_2 with the dual weight and exponent."""
        _, v3 = dual_weight(v1, v2, q1, q2)
        return cls(v1, v2, v3, HolderTuple.from_pair(q1, q2))


def _endpoint_prefix(values, step):
    prefix = np.concatenate(([0.0], np.cumsum(values) * step))
    stride = max(1, math.ceil((prefix.size - 1) / (MAX_ENDPOINTS - 1)))
    picks = np.arange(0, prefix.size, stride)
    if picks[-1] != prefix.size - 1:
        picks = np.append(picks, prefix.size - 1)
    return prefix[picks], picks * step


def interval_averages(values, step):
    """Averages of sampled values over every candidate interval.

    :param values: samples of one function
    :param step: cell width
    :return: flat array, the same interval order for every call on one grid
    """
    prefix, positions = _endpoint_prefix(np.asarray(values, dtype=float), step)
    first, second = np.triu_indices(prefix.size, 1)
    return (prefix[second] - prefix[first]) / (positions[second] - positions[first])


def _check_exponent(q, name="q"):
    q = as_exponent(q)
    if q is INF or q <= 1:
        raise ValueError(f"Exponent {name} must be finite and above 1, got {q}")
    return float(q)


def aq_constant(v, q):
    """Compute [v]_{A_q} = sup over I of <v>_I <v**(1/(1-q))>_I**(q-1).

    :param v: Weight
    :param q: exponent above 1
    :return: float
    """
    q = _check_exponent(q)
    step = v.function.step
    direct = interval_averages(v.values, step)
    dual = interval_averages(v.power(1.0 / (1.0 - q)).values, step)
    return float(np.max(direct * dual ** (q - 1.0)))


def rh_constant(v, alpha):
    """Compute [v]_{RH_alpha} = sup over I of <v**alpha>_I**(1/alpha) / <v>_I."""
    alpha = _check_exponent(alpha, "alpha")
    step = v.function.step
    powered = interval_averages(v.power(alpha).values, step)
    direct = interval_averages(v.values, step)
    return float(np.max(powered ** (1.0 / alpha) / direct))


def dual_weight(v1, v2, q1, q2):
    """Return u_3 = v_1**(r/q_1) v_2**(r/q_2) and v_3 = u_3**(1-q_3) with q_3 = r'.

    :raises ValueError: unless 1 < r < INF
    """
    q1, q2 = as_fraction(q1), as_fraction(q2)
    r = q1 * q2 / (q1 + q2)
    if r <= 1:
        raise ValueError(f"Need r = q1 q2 / (q1 + q2) above 1, got {r}")
    q3 = r / (r - 1)
    u3 = v1.power(r / q1) * v2.power(r / q2)
    return u3, u3.power(1 - q3)


def multilinear_apq_constant(vector, exponents):
    """Compute the sup over I of the product of <v_j**(p_j/(p_j-q_j))>_I**(1/p_j-1/q_j).

    :param vector: WeightVector
    :param exponents: ExponentTuple with p_j < q_j
    :return: float
    """
    step = vector.weights[0].function.step
    total = None
    for v, p, q in zip(vector, exponents, vector.holder):
        if p is INF or not p < q:
            raise ValueError(f"Need p_j < q_j, got p={p}, q={q}")
        dual = v.power(p / (p - q))
        term = interval_averages(dual.values, step) ** float(1 / p - 1 / q)
        total = term if total is None else total * term
    return float(np.max(total))


def theorem_constant(exponents, holder, kc=1.0):
    """Closed form kc * prod q_j/(q_j-p_j) * 2**(3 (sum 1/p_j - 1) max p_j/(q_j-p_j)).

    :param exponents: open admissible ExponentTuple with p_j < q_j
    :param holder: HolderTuple
    :param kc: empirical stand-in for the domination constant
    :return: float
    """
    if not is_admissible(exponents, open_tuple=True):
        raise ValueError(f"Exponents {exponents.to_json()} are not open admissible")
    pairs = list(zip(exponents, holder))
    if any(q is not INF and not p < q for p, q in pairs):
        raise ValueError("Need p_j < q_j")
    product = Fraction(1)
    spread = Fraction(0)
    for p, q in pairs:
        if q is INF:
            continue
        product *= q / (q - p)
        spread = max(spread, p / (q - p))
    power = 3 * (sum(1 / p for p in exponents) - 1) * spread
    return float(kc) * float(product) * 2.0 ** float(power)


def _is_standard_dyadic(interval):
    exponent = math.log2(interval.length)
    if exponent != round(exponent):
        return False
    return (interval.left / interval.length).denominator == 1


def mainweight_check(functions, vector, exponents, collection):
    """Compare the weighted sparse form with the constant of the weighted bound.

    The form is evaluated on f_j = g_j w_j**(1/p_j) with w_j = v_j**(p_j/(p_j-q_j)).

    :param functions: g_1, g_2, g_3 as SampledFunction objects on the weight grid
    :param vector: WeightVector
    :param exponents: open admissible ExponentTuple with p_j < q_j
    :param collection: SparseCollection on the standard dyadic grid
    :return: dict with the form, the bound and the ratio, or skipped
    """
    intervals = getattr(collection, "intervals", collection)
    if not all(_is_standard_dyadic(interval) for interval in intervals):
        raise ValueError("Sparse collection must lie in the standard dyadic grid")
    weighted, norms = [], []
    for g, v, p, q in zip(functions, vector, exponents, vector.holder):
        w = v.power(p / (p - q))
        weighted.append(g.with_values(g.values * w.values ** (1.0 / float(p))))
        norms.append(lp_norm(g, q, w.function))
    form = psf_eval(SparseFormSpec(exponents, collection), weighted)
    spread = max(q / (q - p) for p, q in zip(exponents, vector.holder))
    constant = multilinear_apq_constant(vector, exponents)
    bound = theorem_constant(exponents, vector.holder) * constant ** float(spread)
    bound *= float(np.prod(norms))
    if form == 0:
        return {"skipped": False, "form": 0.0, "bound": bound, "ratio": 0.0}
    if bound == 0:
        logger.warning("Zero weighted norm with a positive sparse form, check skipped")
        return {"skipped": True, "form": form, "bound": bound, "ratio": None}
    return {
        "skipped": False,
        "form": form,
        "bound": bound,
        "ratio": form / bound,
        "apq_constant": constant,
    }


def aqcor_exponents(holder, epsilon):
    """Exponents with 1/p_j = 1 - (1 + epsilon)/(2 r_j) and r_j = q_j/(q_j - 1)."""
    delta = 1 + as_fraction(epsilon)
    return ExponentTuple(*(1 / (1 - delta * (1 - 1 / q) / 2) for q in holder))


def apbound_rhs(v1, v2, holder, thetas, delta):
    """Product bound for the multilinear constant with general theta and delta.

    :param holder: HolderTuple (q_1, q_2, q_3)
    :param thetas: (theta_1, theta_2, theta_3)
    :param delta: 1 + epsilon
    :return: float
    """
    q3_theta = 1 - as_fraction(delta) * as_fraction(thetas[2])
    total = 1.0
    for v, q, theta in zip((v1, v2), holder, thetas):
        own = 1 - as_fraction(delta) * as_fraction(theta)
        if q3_theta <= 0 or own <= 0:
            raise ValueError("Need delta theta_j < 1")
        step = v.function.step
        first = interval_averages(v.power(1 / q3_theta).values, step) ** float(q3_theta)
        second = interval_averages(v.power(1 / (own * (1 - q))).values, step)
        total *= float(np.max(first * second ** float((q - 1) * own))) ** float(1 / q)
    return total


def _epsilon_ceiling(holder):
    # keeps every p_j at most 2, so the exponent tuple has epsilon(p) = epsilon
    caps = [1 / (q - 1) for q in holder]
    return min([EPSILON_CEILING] + caps)


def aqcor_reduce(v1, v2, q1, q2, budget=EPSILON_BUDGET):
    """Choose epsilon, the exponents and the product bound of the Aq reduction.

    Epsilon is the largest value up to 1/4 with [v_j**(2/(1-eps))]_{A_q_j} at most
    budget times [v_j**2]_{A_q_j}, found by root bracketing.

    :param v1: Weight
    :param v2: Weight
    :return: dict with epsilon, exponents, bound, measured constant and holds
    :raises AqcorError: if no epsilon in the range keeps the constants in budget
    """
    holder = HolderTuple.from_pair(q1, q2)
    _, v3 = dual_weight(v1, v2, q1, q2)
    base = [aq_constant(v.power(2), q) for v, q in zip((v1, v2), holder)]
    if not all(math.isfinite(value) for value in base):
        raise AqcorError(f"Squared weights have infinite constants {base}")

    def excess(epsilon):
        ratios = [
            aq_constant(v.power(2 / (1 - epsilon)), q) / (budget * value)
            for v, q, value in zip((v1, v2), holder, base)
        ]
        return max(ratios) - 1.0

    ceiling = _epsilon_ceiling(holder)
    floor = float(ceiling) * 1e-6
    try:
        if excess(float(ceiling)) <= 0:
            epsilon = ceiling
        elif excess(floor) > 0:
            raise AqcorError(
                f"No epsilon in ({floor:.3g}, {float(ceiling):.3g}] fits budget {budget}"
            )
        else:
            root = optimize.brentq(excess, floor, float(ceiling), xtol=1e-12)
            epsilon = Fraction(root).limit_denominator(10**12)
    except ValueError as err:
        raise AqcorError(f"Epsilon search failed: {err}") from err
    exponents = aqcor_exponents(holder, epsilon)
    bound = 1.0
    for v, q in zip((v1, v2), holder):
        powered = aq_constant(v.power(2 / (1 - epsilon)), q)
        bound *= powered ** float((1 - epsilon) / (2 * q))
    measured = multilinear_apq_constant(WeightVector(v1, v2, v3, holder), exponents)
    holds = measured <= bound * (1 + 1e-9)
    logger.info(
        f"Aq reduction: epsilon={float(epsilon):.6g}, measured {measured:.6g}, bound {bound:.6g}"
    )
    return {
        "epsilon": str(epsilon),
        "exponents": exponents.to_json(),
        "exponent_tuple": exponents,
        "base_constants": base,
        "bound": bound,
        "measured": measured,
        "holds": holds,
    }


def rh_ap_equivalence_check(v, q):
    """Report [v**2]_{A_q}, [v]_{A_{(q+1)/2}} and [v]_{RH_2} with the relations between them.

    Per interval, [v]_{A_{(q+1)/2}} and [v]_{RH_2} are at most [v**2]_{A_q}**(1/2),
    and [v**2]_{A_q} is at most the product of their squares.
    """
    q = _check_exponent(q)
    squared = aq_constant(v.power(2), q)
    middle = aq_constant(v, (q + 1) / 2)
    reverse = rh_constant(v, 2)
    slack = 1 + 1e-9
    relations = {
        "ap_below_root": middle <= math.sqrt(squared) * slack,
        "rh_below_root": reverse <= math.sqrt(squared) * slack,
        "squared_below_product": squared <= (reverse * middle) ** 2 * slack,
    }
    finite = [math.isfinite(value) for value in (squared, middle, reverse)]
    return {
        "aq_squared": squared,
        "aq_middle": middle,
        "rh_2": reverse,
        "relations": relations,
        "cofinite": all(finite) or not any(finite),
    }


def weighted_maximal_check(g, w, p, q):
    """Compare ||M_{p,w} g||_{L^q(w)} with (q/(q-p))**(1/p) ||g||_{L^q(w)}.

    :param g: SampledFunction
    :param w: Weight on the grid of g
    :param p: finite exponent at least 1
    :param q: exponent above p
    :return: dict with both sides and their ratio
    """
    p, q = float(as_exponent(p)), float(as_exponent(q))
    if not q > p >= 1:
        raise ValueError(f"Need 1 <= p < q, got p={p}, q={q}")
    maximal = np.array(
        [dyadic_weighted_maximal(g, w.function, p, x) for x in g.midpoints]
    )
    lhs = lp_norm(g.with_values(maximal), q, w.function)
    rhs = (q / (q - p)) ** (1.0 / p) * lp_norm(g, q, w.function)
    ratio = 0.0 if lhs == 0 else lhs / rhs
    return {"maximal_norm": lhs, "bound": rhs, "ratio": ratio}
