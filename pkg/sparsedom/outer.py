# vim: set filetype=python ts=4 sw=4
# -*- coding: utf-8 -*-
"""Sizes, superlevel outer measures and outer Lp norms on rank 1 collections.

Tasks include:
1. Evaluating the sizes s_j and s^1 on trees
2. Covering superlevel sets with trees, greedily or by exhaustive search
3. Integrating the outer Lp norm and checking the outer Hoelder inequality
4. Measuring the localized embedding of the tritile maps

"""
import csv
from dataclasses import dataclass
import io
import logging
import math

import numpy as np
from sparsedom.grid import as_exponent
from sparsedom.grid import dilate
from sparsedom.grid import exponent_to_float
from sparsedom.grid import INF
from sparsedom.signals import local_average
from sparsedom.signals import restrict as restrict_function
from sparsedom.sparse import stopping_intervals
from sparsedom.tiles import enumerate_trees
from sparsedom.tiles import good_set
from sparsedom.tiles import tree_split
from sparsedom.tiles import tritile_maps

logger = logging.getLogger(__name__)

EXACT_LIMIT = 14
LEVEL_RATIO = 2.0**0.25
SUPERLEVEL_MODES = ("greedy", "exact")


class ExactModeError(ValueError):
    """Exhaustive search requested on a collection that is too large."""


class HolderError(ArithmeticError):
    """A nonzero form met a vanishing product of outer norms."""


class TritileFunction:
    """Complex values attached to the tritiles of one collection."""

    def __init__(self, collection, values):
        """Attach values to a collection.

        :param collection: Rank1Collection
        :param values: one value per tritile, in collection order
        """
        values = np.asarray(values)
        if values.shape != (len(collection),):
            raise ValueError(f"Expected {len(collection)} values, got shape {values.shape}")
        self.collection = collection
        self.values = values

    @classmethod
    def from_function(cls, collection, f, j, normalization="l1"):
        """Tritile map F_j(f) over a collection."""
        return cls(collection, tritile_maps(f, collection, j, normalization))

    def magnitudes(self):
        """Absolute values as floats."""
        return np.abs(self.values).astype(float)

    def scaled(self, factor):
        """Multiply every value by factor."""
        return TritileFunction(self.collection, self.values * factor)

    def masked(self, tritiles):
        """Keep the values on the given tritiles and zero the rest."""
        keep = set(tritiles)
        mask = np.array([tritile in keep for tritile in self.collection])
        return TritileFunction(self.collection, np.where(mask, self.values, 0))


@dataclass
class TreeCover:
    """Trees selected to cover a superlevel set."""

    trees: list
    total: float


class TreeTable:
    """Candidate trees of a collection, indexed for fast size evaluation."""

    def __init__(self, collection, j, trees=None, levels=4):
        """Index candidate trees for component j.

        :param collection: Rank1Collection
        :param j: component whose overlapping subtree is left out of the lacunary sum
        :param trees: candidate trees, defaults to enumerate_trees(collection, levels)
        """
        self.collection = collection
        self.j = j
        self.trees = list(enumerate_trees(collection, levels) if trees is None else trees)
        index = {tritile: i for i, tritile in enumerate(collection)}
        self.members, self.lacunary, self.weights = [], [], []
        for tree in self.trees:
            members = np.array([index[tritile] for tritile in tree.members], dtype=int)
            overlapping = set(tree_split(tree)[j].members)
            lacunary = np.array(
                [index[tritile] for tritile in tree.members if tritile not in overlapping],
                dtype=int,
            )
            top = float(tree.top_interval.length)
            weights = np.array([float(collection.tritiles[i].time.length) / top for i in lacunary])
            self.members.append(members)
            self.lacunary.append(lacunary)
            self.weights.append(weights)
        self.lengths = np.array([float(tree.top_interval.length) for tree in self.trees])
        # largest top first, then leftmost, then lowest top frequency
        self.order = np.array(
            sorted(
                range(len(self.trees)),
                key=lambda t: (
                    -self.trees[t].top_interval.length,
                    self.trees[t].top_interval.left,
                    self.trees[t].top_frequency,
                ),
            ),
            dtype=int,
        )

    def __len__(self):
        """Number of candidate trees."""
        return len(self.trees)

    def sizes(self, magnitudes, alive=None):
        """Size s_j of every candidate tree for |F| restricted to alive tritiles."""
        if alive is not None:
            magnitudes = np.where(alive, magnitudes, 0.0)
        result = np.zeros(len(self.trees))
        for t in range(len(self.trees)):
            members = self.members[t]
            if members.size == 0:
                continue
            lacunary = self.lacunary[t]
            energy = np.sum(self.weights[t] * magnitudes[lacunary] ** 2) if lacunary.size else 0.0
            result[t] = math.sqrt(energy) + float(np.max(magnitudes[members]))
        return result

    def sizes_for_masks(self, magnitudes, alive):
        """Maximal size over the candidate trees for each row of an alive matrix."""
        values = alive * magnitudes[None, :]
        best = np.zeros(alive.shape[0])
        for t in range(len(self.trees)):
            members = self.members[t]
            if members.size == 0:
                continue
            lacunary = self.lacunary[t]
            sizes = values[:, members].max(axis=1)
            if lacunary.size:
                sizes = sizes + np.sqrt(values[:, lacunary] ** 2 @ self.weights[t])
            best = np.maximum(best, sizes)
        return best


def _lookup(F):
    return {tritile: i for i, tritile in enumerate(F.collection)}, F.magnitudes()


def size_eval(F, tree, j):
    """Evaluate the size s_j of F on a tree.

    The lacunary part runs over T minus T_j, the members whose j-th frequency
    interval contains the top frequency.

    :param F: TritileFunction
    :param tree: Tree
    :param j: component index
    :return: float
    """
    if not len(tree):
        return 0.0
    index, magnitudes = _lookup(F)
    overlapping = set(tree_split(tree)[j].members)
    top = float(tree.top_interval.length)
    energy = sum(
        float(tritile.time.length) / top * magnitudes[index[tritile]] ** 2
        for tritile in tree.members
        if tritile not in overlapping
    )
    peak = max(magnitudes[index[tritile]] for tritile in tree.members)
    return math.sqrt(energy) + float(peak)


def size_s1(F, tree):
    """Evaluate (1/|I_T|) times the sum over T of |I_P| |F(P)|."""
    if not len(tree):
        return 0.0
    index, magnitudes = _lookup(F)
    top = float(tree.top_interval.length)
    return float(
        sum(float(tritile.time.length) * magnitudes[index[tritile]] for tritile in tree.members)
        / top
    )


def greedy_cover(F, level, table, forced_by=None):
    """Cover {s_j(F) > level} greedily with candidate trees.

    Each step removes the tritiles of the tree with size above the level that
    has the largest top interval, leftmost top and lowest top frequency. With
    forced_by, the trees selected for that function are replayed instead,
    stopping as soon as F is below the level.

    :param F: TritileFunction
    :param level: lambda
    :param table: TreeTable of the collection
    :param forced_by: optional TritileFunction dominating F
    :return: TreeCover
    """
    magnitudes = F.magnitudes()
    alive = np.ones(len(F.collection), dtype=bool)
    replay = None if forced_by is None else iter(greedy_cover(forced_by, level, table).trees)
    chosen, total = [], 0.0
    while True:
        sizes = table.sizes(magnitudes, alive)
        if not sizes.size or sizes.max() <= level:
            break
        if replay is None:
            above = table.order[sizes[table.order] > level]
            pick = int(above[0])
        else:
            pick = next(replay, None)
            if pick is None:
                raise ValueError("The forcing function does not dominate F")
        alive[table.members[pick]] = False
        chosen.append(pick)
        total += table.lengths[pick]
    return TreeCover(chosen, total)


@dataclass
class SuperlevelProfile:
    """Superlevel measure sampled at increasing levels.

    On [levels[i], levels[i + 1]) the measure is taken to be measures[i], and it
    vanishes from the last level on.
    """

    levels: np.ndarray
    measures: np.ndarray
    exact: bool = False

    def measure(self, level):
        """Step function value at a level."""
        position = int(np.searchsorted(self.levels, level, side="right")) - 1
        return float(self.measures[max(position, 0)])

    def layer_cake(self, p):
        """Integral of p lambda**(p-1) times the measure."""
        powers = self.levels**p
        return float(np.sum(self.measures[:-1] * np.diff(powers)) + self.measures[0] * powers[0])

    def to_csv(self):
        """Export as CSV text with columns lambda, measure."""
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(["lambda", "measure"])
        for level, value in zip(self.levels, self.measures):
            writer.writerow([f"{level:.12g}", f"{value:.12g}"])
        return buffer.getvalue()


def _check_mode(mode):
    if mode not in SUPERLEVEL_MODES:
        raise ValueError(f"Superlevel mode must be one of {SUPERLEVEL_MODES}, got '{mode}'")


def _exact_tables(F, table):
    """Minimal cover cost and residual size for every removed set of tritiles."""
    count = len(F.collection)
    if count > EXACT_LIMIT:
        raise ExactModeError(f"Exact mode handles at most {EXACT_LIMIT} tritiles, got {count}")
    states = 1 << count
    bits = 1 << np.arange(count)
    tree_masks = np.array([int(np.sum(bits[members])) for members in table.members], dtype=int)
    cost = np.full(states, np.inf)
    cost[0] = 0.0
    for state in range(states):
        if np.isfinite(cost[state]) and tree_masks.size:
            np.minimum.at(cost, state | tree_masks, cost[state] + table.lengths)
    removed = (np.arange(states)[:, None] & bits[None, :]) != 0
    residual = table.sizes_for_masks(F.magnitudes(), ~removed)
    return cost, residual


def _exact_measure(cost, residual, level):
    feasible = residual <= level
    return float(cost[feasible].min())


def superlevel_measure(F, j, level, mode="greedy", table=None, forced_by=None):
    """Outer measure of {s_j(F) > level}.

    Greedy mode returns the total top length of a greedy tree cover, an upper
    bound. Exact mode searches every union of candidate trees.

    :param F: TritileFunction
    :param j: component index
    :param level: lambda
    :param mode: "greedy" or "exact"
    :param table: optional TreeTable for component j
    :param forced_by: greedy mode only, a dominating TritileFunction to replay
    :return: float
    :raises ExactModeError: exact mode on more than 14 tritiles
    """
    _check_mode(mode)
    table = TreeTable(F.collection, j) if table is None else table
    if mode == "greedy":
        return float(greedy_cover(F, level, table, forced_by).total)
    cost, residual = _exact_tables(F, table)
    return _exact_measure(cost, residual, level)


def _level_grid(F, table, forced_by=None):
    source = F if forced_by is None else forced_by
    magnitudes = source.magnitudes()
    top = float(table.sizes(magnitudes).max()) if len(table) else 0.0
    positive = magnitudes[magnitudes > 0]
    if top == 0 or not positive.size:
        return np.array([0.0])
    levels = [0.0]
    level = float(positive.min()) / 2
    while level < top:
        levels.append(level)
        level *= LEVEL_RATIO
    levels.append(top)
    return np.array(levels)


def superlevel_profile(F, j, mode="greedy", integration="grid", table=None, forced_by=None):
    """Superlevel measure as a step function of the level.

    The grid starts at zero, then runs geometrically with ratio 2**(1/4) from half
    the smallest nonzero |F(P)| up to the largest size. In exact mode the
    breakpoint integration uses every residual size as a level.

    :param F: TritileFunction
    :param j: component index
    :param mode: "greedy" or "exact"
    :param integration: "grid" or "breakpoints", the latter in exact mode only
    :return: SuperlevelProfile
    """
    _check_mode(mode)
    table = TreeTable(F.collection, j) if table is None else table
    if integration == "breakpoints":
        if mode != "exact":
            raise ValueError("Breakpoint integration needs exact mode")
        cost, residual = _exact_tables(F, table)
        reachable = np.isfinite(cost)
        cost, residual = cost[reachable], residual[reachable]
        order = np.argsort(residual, kind="stable")
        running = np.minimum.accumulate(cost[order])
        levels, last = np.unique(residual[order][::-1], return_index=True)
        measures = running[::-1][last]
        return SuperlevelProfile(levels, measures, exact=True)
    if integration != "grid":
        raise ValueError(f"Integration must be 'grid' or 'breakpoints', got '{integration}'")
    levels = _level_grid(F, table, forced_by)
    if mode == "exact":
        cost, residual = _exact_tables(F, table)
        measures = [_exact_measure(cost, residual, level) for level in levels]
    else:
        measures = [greedy_cover(F, level, table, forced_by).total for level in levels]
        # a cover at one level also covers every higher level
        measures = np.minimum.accumulate(measures)
    profile = SuperlevelProfile(levels, np.array(measures, dtype=float), exact=mode == "exact")
    logger.debug(f"Superlevel profile over {len(levels)} levels, mode {mode}")
    return profile


def outer_lp_norm(F, j, p, mode="greedy", integration="grid", table=None, forced_by=None):
    """Outer L^p norm of F with respect to the size s_j.

    :param F: TritileFunction
    :param j: component index
    :param p: exponent in (0, INF]
    :return: float
    """
    p = as_exponent(p)
    table = TreeTable(F.collection, j) if table is None else table
    if p is INF:
        return float(table.sizes(F.magnitudes()).max()) if len(table) else 0.0
    p = float(p)
    if p <= 0:
        raise ValueError(f"Outer norm exponent must be positive, got {p}")
    profile = superlevel_profile(F, j, mode, integration, table, forced_by)
    return profile.layer_cake(p) ** (1.0 / p)


def holder_numerator(functions):
    """Sum over P of |I_P| times the product of |G_j(P)|."""
    collection = functions[0].collection
    lengths = np.array([float(tritile.time.length) for tritile in collection])
    product = np.prod([function.magnitudes() for function in functions], axis=0)
    return float(np.sum(lengths * product))


def outer_holder_check(functions, holder, mode="greedy", levels=4):
    """Compare the tritile sum with the product of outer norms.

    :param functions: three TritileFunction objects on one collection
    :param holder: HolderTuple (q_1, q_2, q_3)
    :param mode: superlevel mode used for the outer norms
    :return: dict with numerator, norms, denominator and ratio
    :raises HolderError: if the denominator vanishes and the numerator does not
    """
    collection = functions[0].collection
    if any(function.collection is not collection for function in functions):
        raise ValueError("Outer Hoelder check needs functions on one collection")
    numerator = holder_numerator(functions)
    trees = enumerate_trees(collection, levels)
    norms = []
    for j, (function, q) in enumerate(zip(functions, holder)):
        table = TreeTable(collection, j, trees)
        norms.append(outer_lp_norm(function, j, q, mode, table=table))
    denominator = float(np.prod(norms))
    if denominator == 0:
        if numerator > 0:
            raise HolderError(f"Tritile sum {numerator} is positive while an outer norm vanishes")
        ratio = 0.0
    else:
        ratio = numerator / denominator
    return {"numerator": numerator, "norms": norms, "denominator": denominator, "ratio": ratio}


def embedding_check(f, parent, p, q, collection, j=0, mode="greedy", threshold=None):
    """Measure the localized embedding ratio of F_j(f 1_3Q) on the good tritiles.

    The good tritiles are those whose time interval lies in no stopping
    interval of f at Q.

    :param f: SampledFunction
    :param parent: DyadicInterval Q
    :param p: exponent in (1, 2)
    :param q: exponent above p/(p-1)
    :param collection: Rank1Collection
    :return: dict with the outer norm, the normalizer and the ratio, or skipped
    """
    p_value, q_value = exponent_to_float(as_exponent(p)), exponent_to_float(as_exponent(q))
    if not 1 < p_value < 2:
        raise ValueError(f"Embedding exponent p must lie in (1, 2), got {p_value}")
    if not q_value > p_value / (p_value - 1):
        raise ValueError(f"Embedding exponent q must exceed {p_value / (p_value - 1)}")
    tripled_interval = dilate(parent, 3)
    local = restrict_function(f, tripled_interval)
    average = local_average(local, tripled_interval, p_value)
    if average == 0:
        logger.warning(f"Zero average on {tripled_interval.to_json()}, embedding check skipped")
        return {"skipped": True, "ratio": None}
    family = stopping_intervals(f, p_value, parent, threshold)
    good = good_set(collection, family.members)
    F = TritileFunction.from_function(collection, local, j).masked(good.tritiles)
    norm = outer_lp_norm(F, j, q_value, mode)
    normalizer = float(parent.length) ** (1.0 / q_value) * average
    return {
        "skipped": False,
        "norm": norm,
        "normalizer": normalizer,
        "ratio": norm / normalizer,
        "stopping": len(family.members),
        "good": len(good),
    }
