# vim: set filetype=python ts=4 sw=4
# -*- coding: utf-8 -*-
"""Experiment files, the batch runner and report emission.

An experiment file is a JSON object naming a command and, optionally, its
presets, exponents and parameters. Missing entries take the defaults of the
command. The report of a run is canonical JSON, so that the same file and seed
give byte-identical reports; run times are kept apart in timings.json.
"""
from concurrent import futures
import csv
from dataclasses import dataclass
from dataclasses import field
from fractions import Fraction
import hashlib
import io
import json
import logging
import math
import os
import statistics
import time

import numpy as np
from sparsedom import __version__
from sparsedom import presets
from sparsedom.grid import as_exponent
from sparsedom.grid import DyadicInterval
from sparsedom.grid import epsilon
from sparsedom.grid import ExponentTuple
from sparsedom.grid import HolderTuple
from sparsedom.grid import INF
from sparsedom.grid import Infinity
from sparsedom.grid import Interval
from sparsedom.grid import is_admissible
from sparsedom.grid import reciprocal
from sparsedom.grid import sharp_range
from sparsedom.multiplier import corvv_lattice_search
from sparsedom.multiplier import corvv_range
from sparsedom.multiplier import family_decay_spread
from sparsedom.multiplier import isk_check
from sparsedom.multiplier import lambda_m_quadrature
from sparsedom.multiplier import multiplier_domination_check
from sparsedom.multiplier import MultiplierSpec
from sparsedom.multiplier import normalize_vector
from sparsedom.multiplier import sharpness_experiment
from sparsedom.multiplier import vector_valued_form
from sparsedom.multiplier import weak_type_sets
from sparsedom.outer import embedding_check
from sparsedom.outer import EXACT_LIMIT
from sparsedom.outer import outer_holder_check
from sparsedom.outer import superlevel_profile
from sparsedom.outer import TreeTable
from sparsedom.outer import TritileFunction
from sparsedom.signals import VectorSignal
from sparsedom.sparse import build_sparse
from sparsedom.sparse import CertificationError
from sparsedom.sparse import certify_sparseness
from sparsedom.sparse import collection_digest
from sparsedom.sparse import default_threshold
from sparsedom.sparse import MERGED_PACKING
from sparsedom.sparse import reduced_exponents
from sparsedom.sparse import tripled
from sparsedom.tiles import almost_localized_check
from sparsedom.tiles import build_wave_packet
from sparsedom.tiles import domination_check
from sparsedom.tiles import generate_rank1
from sparsedom.tiles import sparse_collections_for
from sparsedom.weights import aq_constant
from sparsedom.weights import aqcor_reduce
from sparsedom.weights import AqcorError
from sparsedom.weights import mainweight_check
from sparsedom.weights import rh_ap_equivalence_check
from sparsedom.weights import theorem_constant
from sparsedom.weights import weighted_maximal_check
from sparsedom.weights import WeightVector

logger = logging.getLogger(__name__)

REPORT_FILE = "report.json"
TIMINGS_FILE = "timings.json"
FAILURE_FILE = "failure.json"
CONSTANTS_FILE = "constants.json"
MAX_SEED = 2**64
MIN_RESOLUTION = 64
REGRESSION_TOLERANCE = 0.1
TILE_WINDOW = (-16.0, 16.0)
UNIT_WINDOW = (0.0, 1.0)
SCHEMA_KEYS = (
    "cases",
    "command",
    "exact_oracles",
    "exponents",
    "functions",
    "holder",
    "multipliers",
    "params",
    "resolution",
    "seed",
    "weights",
    "workers",
)
TABLE_COLUMNS = {
    "ratios": ("case", "ratio"),
    "sharpness": ("M", "lower_bound"),
    "sparse": ("case", "grid_shift", "intervals", "eta", "tripled_eta", "packing"),
    "superlevel": ("lambda", "measure"),
}


class ExperimentError(ValueError):
    """An experiment file that does not follow the schema, or names unknown presets."""


class AssertionFailure(AssertionError):
    """Checked inequalities that failed, with the report that recorded them."""

    def __init__(self, report):
        """Summarize the failed checks of a report."""
        self.report = report
        names = sorted({failure["check"] for failure in report.failures})
        super().__init__(f"{len(report.failures)} failed checks: {', '.join(names)}")


def jsonable(value):
    """Convert numbers, fractions, tuples and exponents to plain JSON values."""
    if isinstance(value, dict):
        return {str(key): jsonable(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [jsonable(item) for item in value]
    if isinstance(value, (ExponentTuple, HolderTuple, Interval)):
        return value.to_json()
    if isinstance(value, (Fraction, Infinity)):
        return str(value)
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else str(value)
    if isinstance(value, (complex, np.complexfloating)):
        return [jsonable(value.real), jsonable(value.imag)]
    if isinstance(value, np.ndarray):
        return jsonable(value.tolist())
    return value


def canonical_json(value):
    """Sorted, indented JSON bytes with a trailing newline."""
    text = json.dumps(
        jsonable(value),
        sort_keys=True,
        ensure_ascii=True,
        indent=2,
        separators=(", ", ": "),
        allow_nan=False,
    )
    return (text + "\n").encode("utf-8")


@dataclass
class Command:
    """A runner and the defaults of its experiment files."""

    name: str
    runner: object
    cases: int = 1
    functions: list = field(default_factory=lambda: ["random_smooth"] * 3)
    weights: list = field(default_factory=list)
    multipliers: list = field(default_factory=list)
    exponents: tuple = ("3/2", "3/2", "3")
    holder: tuple = ("3", "3")
    params: dict = field(default_factory=dict)
    holder_tuple: bool = False


@dataclass
class ExperimentConfig:
    """A validated experiment file."""

    command: str
    seed: int
    resolution: int
    cases: int
    functions: list
    weights: list
    multipliers: list
    exponents: ExponentTuple
    holder: tuple
    params: dict
    exact_oracles: bool = False
    workers: int = 1

    @classmethod
    def from_json(cls, data, overrides=None):
        """Validate an experiment file.

        :param data: dict read from the experiment file
        :param overrides: dict of seed, resolution, exact_oracles or workers given explicitly
            on the command line, in the environment or in the INI profile
        :return: ExperimentConfig
        :raises ExperimentError: listing every problem found
        """
        if not isinstance(data, dict):
            raise ExperimentError(f"An experiment must be a JSON object, got {type(data).__name__}")
        unknown = sorted(set(data) - set(SCHEMA_KEYS))
        if unknown:
            raise ExperimentError(
                f"Unknown experiment keys {unknown}, allowed: {list(SCHEMA_KEYS)}"
            )
        name = data.get("command")
        if name not in COMMANDS:
            raise ExperimentError(f"Command must be one of {sorted(COMMANDS)}, got '{name}'")
        command = COMMANDS[name]
        values = {
            "seed": 0,
            "resolution": 2**12,
            "cases": command.cases,
            "functions": list(command.functions),
            "weights": list(command.weights),
            "multipliers": list(command.multipliers),
            "exponents": list(command.exponents),
            "holder": list(command.holder),
            "params": {},
            "exact_oracles": False,
            "workers": 1,
        }
        values.update({key: value for key, value in data.items() if key != "command"})
        values.update(overrides or {})

        messages = []
        seed, resolution = values["seed"], values["resolution"]
        if not _is_int(seed) or not 0 <= seed < MAX_SEED:
            messages.append(f"Seed must be an integer in [0, 2**64), got {seed!r}")
        if not _is_int(resolution) or resolution < MIN_RESOLUTION or resolution & (resolution - 1):
            messages.append(
                f"Resolution must be a power of two of at least {MIN_RESOLUTION}, "
                f"got {resolution!r}"
            )
        for key in ("cases", "workers"):
            if not _is_int(values[key]) or values[key] < 1:
                messages.append(
                    f"{key.capitalize()} must be a positive integer, got {values[key]!r}"
                )
        if not isinstance(values["exact_oracles"], bool):
            messages.append(f"exact_oracles must be true or false, got {values['exact_oracles']!r}")

        exponents = _parse_exponents(values["exponents"], 3, "exponents", messages)
        if exponents is not None:
            try:
                exponents = ExponentTuple(*exponents)
            except ValueError as err:
                messages.append(f"Exponents {values['exponents']}: {err}")
                exponents = None
        if exponents is not None and not is_admissible(exponents, open_tuple=True):
            messages.append(f"Exponents {exponents.to_json()} are not open admissible")
        holder = _parse_exponents(values["holder"], 2, "holder", messages)
        if holder is not None:
            if any(q is not INF and q <= 1 for q in holder):
                messages.append(f"Holder exponents must exceed 1, got {values['holder']}")
            elif command.holder_tuple:
                try:
                    HolderTuple.from_pair(*holder)
                except ValueError as err:
                    messages.append(str(err))

        if not isinstance(values["functions"], list) or len(values["functions"]) != 3:
            messages.append("Functions must be a list of three preset references")
        else:
            _check_presets("function", values["functions"], messages)
        for kind, key in (("weight", "weights"), ("multiplier", "multipliers")):
            if not isinstance(values[key], list):
                messages.append(f"{key.capitalize()} must be a list of preset references")
            else:
                _check_presets(kind, values[key], messages)

        params = values["params"]
        if not isinstance(params, dict):
            messages.append("Params must be a JSON object")
            params = {}
        unknown = sorted(set(params) - set(command.params))
        if unknown:
            messages.append(
                f"Unknown params {unknown} for '{name}', allowed: {sorted(command.params)}"
            )

        if messages:
            raise ExperimentError(". ".join(messages))
        return cls(
            command=name,
            seed=int(seed),
            resolution=int(resolution),
            cases=int(values["cases"]),
            functions=values["functions"],
            weights=values["weights"],
            multipliers=values["multipliers"],
            exponents=exponents,
            holder=tuple(holder),
            params={**command.params, **params},
            exact_oracles=values["exact_oracles"],
            workers=int(values["workers"]),
        )

    def to_json(self):
        """Everything that determines the results, so not the worker count."""
        return {
            "command": self.command,
            "seed": self.seed,
            "resolution": self.resolution,
            "cases": self.cases,
            "functions": self.functions,
            "weights": self.weights,
            "multipliers": self.multipliers,
            "exponents": self.exponents.to_json(),
            "holder": [str(q) for q in self.holder],
            "params": self.params,
            "exact_oracles": self.exact_oracles,
        }


def _is_int(value):
    return isinstance(value, int) and not isinstance(value, bool)


def _parse_exponents(items, count, key, messages):
    if not isinstance(items, list) or len(items) != count:
        messages.append(f"{key.capitalize()} must be a list of {count} exponents, got {items!r}")
        return None
    try:
        return [as_exponent(item) for item in items]
    except (TypeError, ValueError) as err:
        messages.append(f"Cannot read {key} {items!r}: {err}")
        return None


def _check_presets(kind, references, messages):
    for reference in references:
        try:
            presets.lookup(kind, reference)
        except ValueError as err:
            messages.append(str(err))


@dataclass
class Report:
    """Records, summary, tables and failed checks of one run."""

    command: str
    config: dict
    records: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)
    tables: dict = field(default_factory=dict)
    failures: list = field(default_factory=list)
    constants: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)

    @property
    def passed(self):
        """True when every check held."""
        return not self.failures

    def check(self, name, lhs, rhs, holds, **detail):
        """Record one asserted inequality lhs <= rhs, or identity lhs == rhs.

        :return: holds
        """
        holds = bool(holds)
        if not holds:
            failure = {"check": name, "lhs": lhs, "rhs": rhs}
            failure.update(detail)
            self.failures.append(failure)
            logger.warning(f"Check {name} failed: {lhs!r} against {rhs!r} {detail}")
        return holds

    def to_dict(self):
        """The report without its timings."""
        return {
            "sparsedom": __version__,
            "command": self.command,
            "config": self.config,
            "records": self.records,
            "summary": self.summary,
            "tables": self.tables,
            "failures": self.failures,
            "passed": self.passed,
            "constants": self.constants,
        }

    def to_json(self):
        """Canonical JSON bytes."""
        return canonical_json(self.to_dict())

    def digest(self):
        """sha256 hex digest of the canonical JSON."""
        return hashlib.sha256(self.to_json()).hexdigest()


def _timed(func):
    def call(item):
        start = time.perf_counter()
        result = func(item)
        return result, time.perf_counter() - start

    return call


def _batch(report, mapper, func, items):
    """Run func over items through the mapper, keeping the order and the case timings."""
    pairs = list(mapper(_timed(func), items))
    report.timings.setdefault("cases", []).extend(seconds for _, seconds in pairs)
    return [result for result, _ in pairs]


def case_seeds(seed, count):
    """Independent 32 bit seeds for the cases of a batch."""
    state = np.random.SeedSequence(seed).generate_state(count, dtype=np.uint32)
    return [int(value) for value in state]


def _window(config, bounds, factor=1):
    return presets.sampled_window(config.resolution * factor, *bounds)


def _functions(config, grid, seed):
    return [
        presets.resolve("function", reference, grid, seed + j)
        for j, reference in enumerate(config.functions)
    ]


def _multipliers(config):
    return [
        presets.resolve("multiplier", reference, seed=config.seed + index)
        for index, reference in enumerate(config.multipliers)
    ]


def _ratio_summary(ratios):
    ratios = [ratio for ratio in ratios if ratio is not None]
    if not ratios:
        return {"count": 0, "max_ratio": None, "median_ratio": None}
    return {
        "count": len(ratios),
        "max_ratio": max(ratios),
        "median_ratio": statistics.median(ratios),
    }


def run_identity_suite(config, report, mapper):
    """Exact identities and the Fourier identity of the unit multiplier."""
    tolerance = float(config.params["tolerance"])
    grid = _window(config, UNIT_WINDOW)
    identity = MultiplierSpec("identity")

    def fourier(seed):
        functions = _functions(config, grid, seed)
        value = lambda_m_quadrature(identity, functions).value
        direct = np.sum(functions[0].values * functions[1].values * functions[2].values)
        return complex(value), complex(direct * grid.step)

    results = _batch(report, mapper, fourier, case_seeds(config.seed, config.cases))
    for case, (value, direct) in enumerate(results):
        error = abs(value - direct) / max(abs(direct), 1e-300)
        passed = report.check("fourier_identity", error, tolerance, error <= tolerance, case=case)
        report.records.append(
            {
                "check": "fourier_identity",
                "case": case,
                "lhs": value,
                "rhs": direct,
                "tolerance": tolerance,
                "passed": passed,
            }
        )

    weight = presets.resolve("weight", "constant", grid)
    two = ExponentTuple(2, 2, 2)
    unit = Interval(0, 1)
    chain = certify_sparseness([unit, Interval(0, Fraction(1, 2))], Fraction(1, 2))
    exact = [
        ("theorem_constant", theorem_constant(two, HolderTuple(3, 3, 3)), 216.0, 0.0),
        ("epsilon", float(epsilon(two)), 0.5, 0.0),
        ("constant_weight_aq", aq_constant(weight, 2), 1.0, 1e-12),
        ("sharp_range_inside", float(sharp_range(2, 2)[0]), 1.0, 0.0),
        ("sharp_range_outside", float(sharp_range(Fraction(6, 5), Fraction(6, 5))[0]), 0.0, 0.0),
        ("corvv_range", float(corvv_range(2, 2, (3, 3, 3))[0]), 1.0, 0.0),
        ("tripled_eta", float(tripled(chain).eta), 1 / 6, 1e-12),
    ]
    for name, lhs, rhs, slack in exact:
        passed = report.check(name, lhs, rhs, abs(lhs - rhs) <= slack)
        report.records.append(
            {"check": name, "lhs": lhs, "rhs": rhs, "tolerance": slack, "passed": passed}
        )
    report.summary = {
        "checks": len(report.records),
        "passed": sum(record["passed"] for record in report.records),
    }


def run_sparse_build(config, report, mapper):
    """Construct sparse collections on every grid and certify them."""
    grid = _window(config, UNIT_WINDOW)
    working = reduced_exponents(config.exponents)
    limits = [4 * default_threshold(p) for p in working]

    def build(seed):
        functions = _functions(config, grid, seed)
        results = []
        for grid_shift in (0, 1, 2):
            collection = build_sparse(functions, config.exponents, grid_shift)
            try:
                tripled_eta = float(tripled(collection).achieved_eta())
            except CertificationError as err:
                tripled_eta = float(err.ratio)
            results.append((grid_shift, collection, tripled_eta))
        return results

    for case, results in enumerate(
        _batch(report, mapper, build, case_seeds(config.seed, config.cases))
    ):
        for grid_shift, collection, tripled_eta in results:
            info = collection.info
            eta = float(collection.achieved_eta())
            packing = info["max_generation_ratio"]
            where = {"case": case, "grid_shift": grid_shift}
            passed = all(
                [
                    report.check("sparseness", 0.5, eta, eta >= 0.5, **where),
                    report.check(
                        "tripled_sparseness", 1 / 6, tripled_eta, tripled_eta >= 1 / 6, **where
                    ),
                    report.check(
                        "packing",
                        packing,
                        float(MERGED_PACKING),
                        packing <= MERGED_PACKING,
                        **where,
                    ),
                    report.check(
                        "threshold",
                        info["thresholds"],
                        limits,
                        all(c <= limit for c, limit in zip(info["thresholds"], limits)),
                        **where,
                    ),
                ]
            )
            report.records.append(
                dict(
                    where,
                    intervals=len(collection),
                    generations=info["generations"],
                    eta=eta,
                    tripled_eta=tripled_eta,
                    packing=packing,
                    thresholds=info["thresholds"],
                    warnings=info["warnings"],
                    collection_digest=collection_digest(collection),
                    passed=passed,
                )
            )
    report.tables["sparse"] = [
        [r["case"], r["grid_shift"], r["intervals"], r["eta"], r["tripled_eta"], r["packing"]]
        for r in report.records
    ]
    report.summary = {
        "collections": len(report.records),
        "min_eta": min(r["eta"] for r in report.records),
        "min_tripled_eta": min(r["tripled_eta"] for r in report.records),
        "max_packing": max(r["packing"] for r in report.records),
    }


def run_domination_check(config, report, mapper):
    """Check the tritile form of many rank 1 collections against one sparse form."""
    params = config.params
    grid = _window(config, TILE_WINDOW)
    functions = _functions(config, grid, config.seed)
    collections = sparse_collections_for(functions, config.exponents)

    def check(seed):
        collection = generate_rank1(seed=seed, scales=params["scales"], density=params["density"])
        result = domination_check(collection, functions, config.exponents, collections)
        result.pop("sparse")
        result["tritiles"] = len(collection)
        result["seed"] = seed
        return result

    seeds = case_seeds(config.seed, config.cases)
    for case, result in enumerate(_batch(report, mapper, check, seeds)):
        report.records.append(dict(result, case=case))
    ratios = [record["ratio"] for record in report.records]
    digests = sorted({record["collection_digest"] for record in report.records})
    summary = _ratio_summary(ratios)
    median = summary["median_ratio"]
    summary["uniformity"] = summary["max_ratio"] / median if median else None
    summary["collection_digests"] = digests
    report.check("shared_collection", len(digests), 1, len(digests) == 1)
    if median:
        bound = float(params["uniformity"])
        report.check("uniformity", summary["uniformity"], bound, summary["uniformity"] <= bound)
    report.constants["domination"] = summary["max_ratio"]
    report.tables["ratios"] = [[record["case"], record["ratio"]] for record in report.records]

    if config.multipliers:
        result = multiplier_domination_check(_multipliers(config), functions, config.exponents)
        result.pop("sparse")
        report.check(
            "shared_multiplier_collection",
            result["collection_digest"],
            digests[0],
            digests == [result["collection_digest"]],
        )
        summary["multipliers"] = {
            "psf": result["psf"],
            "max_ratio": result["max_ratio"],
            "grid_type": result["grid_type"],
            "records": result["records"],
        }
        report.constants["multiplier_domination"] = result["max_ratio"]
    report.summary = summary


def _random_tritile_function(collection, rng, zero_fraction):
    size = len(collection)
    values = rng.exponential(size=size) * np.exp(1j * rng.uniform(0, 2 * np.pi, size=size))
    values[rng.uniform(size=size) < zero_fraction] = 0
    return TritileFunction(collection, values)


def run_outer_holder(config, report, mapper):
    """Outer Hoelder inequality on random tritile functions, greedy against exact."""
    params = config.params
    holder = HolderTuple.from_pair(*config.holder)
    levels = int(params["levels"])
    exact = config.exact_oracles

    def instance(seed):
        rng = np.random.default_rng(seed)
        collection = generate_rank1(seed=seed, scales=params["scales"], density=params["density"])
        functions = [
            _random_tritile_function(collection, rng, params["zero_fraction"]) for _ in range(3)
        ]
        result = {"seed": seed, "tritiles": len(collection)}
        result["greedy"] = outer_holder_check(functions, holder, "greedy", levels)["ratio"]
        result["exact"] = None
        result["violations"] = 0
        profile = None
        if exact and len(collection) <= EXACT_LIMIT:
            result["exact"] = outer_holder_check(functions, holder, "exact", levels)["ratio"]
            for j, function in enumerate(functions):
                table = TreeTable(collection, j, levels=levels)
                greedy = superlevel_profile(function, j, "greedy", table=table)
                oracle = superlevel_profile(function, j, "exact", table=table)
                slack = 1e-12 * np.maximum(oracle.measures, 1.0)
                result["violations"] += int(np.sum(greedy.measures < oracle.measures - slack))
                if profile is None:
                    profile = greedy
        else:
            profile = superlevel_profile(functions[0], 0, "greedy", table=TreeTable(collection, 0))
        return result, profile

    seeds = case_seeds(config.seed, config.cases)
    bound = float(params["bound"])
    for case, (result, profile) in enumerate(_batch(report, mapper, instance, seeds)):
        ratio = result["exact"] if result["exact"] is not None else result["greedy"]
        report.check("outer_holder", ratio, bound, ratio <= bound, case=case)
        violations = result["violations"]
        report.check("greedy_above_exact", violations, 0, not violations, case=case)
        report.records.append(dict(result, case=case, ratio=ratio))
        if case == 0:
            report.tables["superlevel"] = [
                [float(level), float(measure)]
                for level, measure in zip(profile.levels, profile.measures)
            ]
    summary = _ratio_summary([record["ratio"] for record in report.records])
    summary["mode"] = "exact" if exact else "greedy"
    summary["violations"] = sum(record["violations"] for record in report.records)
    report.summary = summary
    report.constants["outer_holder"] = summary["max_ratio"]
    report.tables["ratios"] = [[record["case"], record["ratio"]] for record in report.records]


def run_embedding(config, report, mapper):
    """Localized embedding ratios under grid refinement."""
    params = config.params
    collection = generate_rank1(
        seed=config.seed, scales=params["scales"], density=params["density"]
    )
    parent = DyadicInterval(0, 0)
    reference = config.functions[0]
    factors = [int(factor) for factor in params["refinements"]]
    tolerance = float(params["tolerance"])

    def ratios(seed):
        result = []
        for factor in factors:
            grid = _window(config, TILE_WINDOW, factor)
            f = presets.resolve("function", reference, grid, seed)
            check = embedding_check(
                f, parent, params["p"], params["q"], collection, j=int(params["component"])
            )
            result.append(check["ratio"])
        return result

    seeds = case_seeds(config.seed, config.cases)
    for case, result in enumerate(_batch(report, mapper, ratios, seeds)):
        record = {"case": case, "seed": seeds[case], "refinements": factors, "ratios": result}
        if any(ratio is None for ratio in result):
            record["skipped"] = True
        else:
            record["skipped"] = False
            deviation = max(abs(ratio - result[0]) for ratio in result)
            if result[0]:
                spread = deviation / result[0]
            else:
                spread = 0.0 if deviation == 0 else math.inf
            record["spread"] = spread
            report.check("refinement_stability", spread, tolerance, spread <= tolerance, case=case)
        report.records.append(record)
    finest = [record["ratios"][-1] for record in report.records if not record["skipped"]]
    report.summary = dict(
        _ratio_summary(finest), skipped=sum(record["skipped"] for record in report.records)
    )
    report.constants["embedding"] = report.summary["max_ratio"]
    report.tables["ratios"] = [
        [record["case"], record["ratios"][-1]] for record in report.records if not record["skipped"]
    ]


def run_localization(config, report, mapper):
    """Almost localization ratios on P_=(J), and orthogonality of packets sharing J."""
    params = config.params
    grid = _window(config, TILE_WINDOW)
    collection = generate_rank1(
        seed=config.seed, scales=params["scales"], density=params["density"]
    )
    interval = Interval.from_json(params["interval"])
    reference = config.functions[0]

    def measure(seed):
        f = presets.resolve("function", reference, grid, seed)
        return almost_localized_check(collection, interval, [f], order=int(params["order"]))

    seeds = case_seeds(config.seed, config.cases)
    for case, result in enumerate(_batch(report, mapper, measure, seeds)):
        report.records.append(dict(result, case=case, seed=seeds[case]))
    measured = [record for record in report.records if not record["skipped"]]
    report.check("localization_measured", len(measured), 1, len(measured) >= 1)
    sup_ratio = max((record["sup_ratio"] for record in measured), default=None)
    l2_ratio = max((record["l2_ratio"] for record in measured), default=None)
    for name, value in (("sup_ratio", sup_ratio), ("l2_ratio", l2_ratio)):
        if value is not None:
            report.check(f"{name}_finite", value, math.inf, 0 < value < math.inf)

    inner = 0.0
    for tritile in collection:
        packets = [build_wave_packet(tritile.tile(j), grid, "l2") for j in range(3)]
        for first, second in ((0, 1), (0, 2), (1, 2)):
            product = np.sum(packets[first].samples * np.conj(packets[second].samples))
            inner = max(inner, abs(grid.step * product))
    tolerance = float(params["tolerance"])
    report.check("packet_orthogonality", inner, tolerance, inner <= tolerance)
    report.summary = {
        "tritiles": report.records[0]["tritiles"] if report.records else 0,
        "skipped": sum(record["skipped"] for record in report.records),
        "sup_ratio": sup_ratio,
        "l2_ratio": l2_ratio,
        "max_inner_product": inner,
    }
    report.constants["almost_localization_sup"] = sup_ratio
    report.constants["almost_localization_l2"] = l2_ratio
    report.tables["ratios"] = [
        [record["case"], record["l2_ratio"]] for record in report.records if not record["skipped"]
    ]


def run_weighted_bound(config, report, mapper):
    """Weighted sparse bound, reverse Hoelder relations and the weighted maximal bound."""
    grid = _window(config, UNIT_WINDOW)
    q1, q2 = config.holder
    exponents = config.exponents
    items = [
        (index, seed)
        for index in range(len(config.weights))
        for seed in case_seeds(config.seed + index, config.cases)
    ]

    def measure(item):
        index, seed = item
        v = presets.resolve("weight", config.weights[index], grid, seed)
        vector = WeightVector.completed(v, v, q1, q2)
        functions = [f.with_values(np.abs(f.values)) for f in _functions(config, grid, seed)]
        collection = build_sparse(functions, exponents, grid_shift=0)
        main = mainweight_check(functions, vector, exponents, collection)
        equivalence = rh_ap_equivalence_check(v, q1)
        maximal = weighted_maximal_check(functions[0], v, exponents.p1, q1)
        return main, equivalence, maximal

    for (index, seed), (main, equivalence, maximal) in zip(
        items, _batch(report, mapper, measure, items)
    ):
        where = {"weight": index, "seed": seed}
        if not main["skipped"]:
            report.check("weighted_bound", main["form"], main["bound"], main["ratio"] <= 1, **where)
        report.check(
            "weighted_maximal",
            maximal["maximal_norm"],
            maximal["bound"],
            maximal["ratio"] <= 1,
            **where,
        )
        failed = sorted(name for name, holds in equivalence["relations"].items() if not holds)
        report.check("rh_ap_relations", failed, [], not failed, **where)
        report.records.append(
            dict(
                where,
                preset=config.weights[index],
                form=main["form"],
                bound=main["bound"],
                ratio=main["ratio"],
                apq_constant=main.get("apq_constant"),
                equivalence=equivalence,
                maximal=maximal,
            )
        )
    summary = _ratio_summary([record["ratio"] for record in report.records])
    summary["theorem_constant"] = theorem_constant(exponents, HolderTuple.from_pair(q1, q2))
    report.summary = summary
    report.constants["weighted"] = summary["max_ratio"]
    report.tables["ratios"] = [
        [case, record["ratio"]]
        for case, record in enumerate(report.records)
        if record["ratio"] is not None
    ]


def run_aqcor(config, report, mapper):
    """Reduction of the multilinear constant to the A_q constants of v1**2 and v2**2."""
    grid = _window(config, UNIT_WINDOW)
    q1, q2 = config.holder
    references = config.weights

    def reduce(seed):
        v1 = presets.resolve("weight", references[0], grid, seed)
        v2 = presets.resolve("weight", references[1 % len(references)], grid, seed + 1)
        try:
            result = aqcor_reduce(v1, v2, q1, q2, float(config.params["budget"]))
        except AqcorError as err:
            return {"error": str(err)}
        result.pop("exponent_tuple")
        return result

    seeds = case_seeds(config.seed, config.cases)
    for case, result in enumerate(_batch(report, mapper, reduce, seeds)):
        if "error" in result:
            report.check("epsilon_search", result["error"], None, False, case=case)
        else:
            report.check("aqcor", result["measured"], result["bound"], result["holds"], case=case)
        report.records.append(dict(result, case=case, seed=seeds[case]))
    report.summary = {
        "cases": len(report.records),
        "violations": len(report.failures),
        "min_epsilon": min(
            (Fraction(r["epsilon"]) for r in report.records if "epsilon" in r), default=None
        ),
    }


def run_sharpness(config, report, mapper):
    """Lower bounds of the counterexample family and the uniformity of its decay constants."""
    params = config.params
    q1, q2 = config.holder
    table = sharpness_experiment(
        q1, q2, params["sizes"], params["seeds"], params["narrowing"]
    )
    bounds = [row["lower_bound"] for row in table.rows]
    for earlier, later, row in zip(bounds, bounds[1:], table.rows[1:]):
        report.check("monotone", earlier, later, later >= earlier * (1 - 1e-9), M=row["M"])
    decay = family_decay_spread(params["decay_sizes"])
    spread = max(decay["spread"])
    limit = float(params["decay_spread"])
    report.check("decay_uniformity", spread, limit, spread <= limit)
    report.records = list(table.rows)
    report.summary = {
        "exponent": table.exponent,
        "predicted": table.predicted,
        "info": table.info,
        "decay": decay,
    }
    report.tables["sharpness"] = [[row["M"], row["lower_bound"]] for row in table.rows]


def _witness_fits(witness, q1, q2, q3, r):
    if not is_admissible(witness, open_tuple=True):
        return False
    for p, q, value in zip(witness, (q1, q2, q3), r):
        bound = max(reciprocal(q), reciprocal(value))
        if bound and not p < 1 / bound:
            return False
    return True


def run_vector_valued(config, report, mapper):
    """Vector valued range, exceptional sets and the interval density condition."""
    params = config.params
    q1, q2 = config.holder
    exponents = config.exponents
    r = [as_exponent(value) for value in params["r"]]

    grid_records = []
    for first_q in params["grid_q1"]:
        for second_q in params["grid_q2"]:
            for inner in params["grid_r"]:
                inner = [as_exponent(value) for value in inner]
                holds, q3, witness = corvv_range(first_q, second_q, inner)
                found = corvv_lattice_search(first_q, second_q, inner)
                point = {"q1": first_q, "q2": second_q, "r": inner}
                report.check("corvv_search", holds, found, holds == found, **point)
                fits = True
                if holds:
                    qs = (as_exponent(first_q), as_exponent(second_q), q3)
                    fits = _witness_fits(witness, *qs, inner)
                    report.check("corvv_witness", witness, [first_q, second_q, inner], fits)
                record = dict(point, q3=q3, holds=holds, found=found)
                grid_records.append(dict(record, witness=witness, fits=fits))

    grid = _window(config, UNIT_WINDOW)
    components = int(params["components"])
    multipliers = _multipliers(config) or [MultiplierSpec("bht_sign")]

    def case(seed):
        rng = np.random.default_rng(seed)
        vectors = []
        for j, (q, inner) in enumerate(((q1, r[0]), (q2, r[1]))):
            parts = [
                presets.resolve("function", config.functions[j], grid, seed + 3 * k + j)
                for k in range(components)
            ]
            vectors.append(normalize_vector(VectorSignal(parts, inner), q))
        start = int(rng.integers(0, 6))
        length = int(rng.integers(2, 9 - start))
        f3_set = Interval(Fraction(start, 8), Fraction(length, 8))
        sets = weak_type_sets(vectors[0], vectors[1], f3_set, exponents, q1, q2)
        midpoints = grid.midpoints
        inside = np.zeros(grid.size)
        for piece in sets.major:
            left, right = float(piece.left), float(piece.right)
            inside[(midpoints >= left) & (midpoints < right)] = 1.0
        f3 = grid.with_values(inside)
        functions = [vectors[0].pointwise(), vectors[1].pointwise(), f3]
        collection = build_sparse(functions, exponents, grid_shift=0)
        density = isk_check(collection, sets, f3, float(exponents.p3))
        third = VectorSignal([f3] * components, r[2])
        chosen = [multipliers[k % len(multipliers)] for k in range(components)]
        form = vector_valued_form(chosen, [vectors[0], vectors[1], third])
        return sets, density, form

    seeds = case_seeds(config.seed, config.cases)
    for index, (sets, density, form) in enumerate(_batch(report, mapper, case, seeds)):
        measures = sets.measures
        report.check(
            "enlarged_measure",
            measures["enlarged"],
            measures["f3"] / 8,
            measures["enlarged"] <= measures["f3"] / 8,
            case=index,
        )
        report.check("exceptional_sets", sets.valid, True, sets.valid, case=index)
        report.check(
            "interval_density", density["violations"], [], density["holds"], case=index
        )
        report.records.append(
            {
                "case": index,
                "seed": seeds[index],
                "sets": sets.to_json(),
                "density": density,
                "form": form["absolute"],
            }
        )
    report.summary = {
        "range_points": len(grid_records),
        "range_holds": sum(record["holds"] for record in grid_records),
        "range_found": sum(record["found"] for record in grid_records),
        "range": grid_records,
        "cases": len(report.records),
    }


COMMANDS = {
    command.name: command
    for command in (
        Command(
            "identity-suite",
            run_identity_suite,
            cases=5,
            functions=[{"preset": "random_smooth", "complex_values": True}] * 3,
            params={"tolerance": 1e-6},
        ),
        Command("sparse-build", run_sparse_build, cases=10),
        Command(
            "domination-check",
            run_domination_check,
            cases=20,
            functions=[{"preset": "random_smooth", "modes": 256, "complex_values": True}] * 3,
            multipliers=["bht_sign"] + ["counterexample"] * 8,
            params={"scales": [-1, 0], "density": 1, "uniformity": 5.0},
        ),
        Command(
            "outer-holder",
            run_outer_holder,
            cases=50,
            holder_tuple=True,
            params={
                "scales": [-1, 0],
                "density": 1,
                "levels": 4,
                "bound": 8.0,
                "zero_fraction": 0.2,
            },
        ),
        Command(
            "embedding",
            run_embedding,
            cases=5,
            functions=[{"preset": "random_smooth", "modes": 256, "complex_values": True}] * 3,
            params={
                "p": "3/2",
                "q": "4",
                "refinements": [1, 2, 4],
                "tolerance": 0.3,
                "scales": [-1, 0],
                "density": 1,
                "component": 0,
            },
        ),
        Command(
            "localization",
            run_localization,
            cases=10,
            functions=[{"preset": "packet_sum", "max_frequency": 8.0}] * 3,
            params={
                "scales": [-1, 0],
                "density": 1,
                "interval": ["0", "1"],
                "order": 16,
                "tolerance": 1e-10,
            },
        ),
        Command(
            "weighted-bound",
            run_weighted_bound,
            cases=2,
            weights=["constant", "two_step", "power"],
            exponents=("2", "2", "2"),
            holder_tuple=True,
        ),
        Command(
            "aqcor",
            run_aqcor,
            cases=5,
            weights=[
                {"preset": "random_aq", "target": 1.5},
                {"preset": "random_aq", "target": 2.0},
            ],
            holder_tuple=True,
            params={"budget": 2.0},
        ),
        Command(
            "sharpness",
            run_sharpness,
            holder=("6/5", "6/5"),
            params={
                "sizes": [1, 2, 4, 8],
                "seeds": [0, 1, 2],
                "narrowing": 2,
                "decay_sizes": [1, 2, 4, 8],
                "decay_spread": 0.05,
            },
        ),
        Command(
            "vector-valued",
            run_vector_valued,
            cases=5,
            exponents=("2", "2", "2"),
            params={
                "r": ["3", "3", "3"],
                "components": 2,
                "grid_q1": ["6/5", "3/2", "2", "3", "inf"],
                "grid_q2": ["6/5", "3/2", "2", "3", "4"],
                "grid_r": [["3", "3", "3"], ["2", "4", "4"], ["inf", "2", "2"], ["4", "2", "4"]],
            },
        ),
    )
}


def load_constants(path=""):
    """Read frozen regression constants.

    :param path: JSON file, defaults to the packaged constants.json
    :return: dict name -> float or None
    :raises ExperimentError: if the file cannot be read
    """
    path = path or os.path.join(os.path.dirname(os.path.abspath(__file__)), CONSTANTS_FILE)
    try:
        with open(path, encoding="utf-8") as file:
            data = json.load(file)
    except (OSError, json.JSONDecodeError) as err:
        raise ExperimentError(f"Cannot read regression constants from {path}: {err}") from err
    constants = data.get("constants") if isinstance(data, dict) else None
    if not isinstance(constants, dict):
        raise ExperimentError(f"{path} has no 'constants' object")
    return constants


def compare_constants(report, frozen, tolerance=REGRESSION_TOLERANCE, require=False):
    """Compare the measured constants of a report with frozen values, within a relative tolerance.

    Constants frozen as null are reported and not compared, unless require is set: then
    a missing frozen value is a failed check.
    """
    regression = {}
    for name, measured in sorted(report.constants.items()):
        expected = frozen.get(name)
        entry = {"measured": measured, "frozen": expected, "compared": False}
        if expected is not None and measured is not None:
            entry["compared"] = True
            report.check(
                f"regression_{name}",
                measured,
                expected,
                abs(measured - expected) <= tolerance * abs(expected),
                tolerance=tolerance,
            )
        elif require:
            logger.warning(f"No frozen value for the regression constant '{name}'")
            report.check(f"regression_{name}", measured, expected, False, tolerance=tolerance)
        regression[name] = entry
    report.summary["regression"] = regression
    return regression


def run(config, frozen=None, require_frozen=False):
    """Run one experiment.

    :param config: ExperimentConfig
    :param frozen: regression constants, defaults to the packaged ones
    :param require_frozen: fail the constants that have no frozen value
    :return: Report
    """
    command = COMMANDS[config.command]
    frozen = load_constants() if frozen is None else frozen
    report = Report(config.command, config.to_json())
    logger.info(f"Running {config.command} with seed {config.seed}, {config.workers} workers")
    start = time.perf_counter()
    with futures.ThreadPoolExecutor(max_workers=config.workers) as executor:
        command.runner(config, report, executor.map)
    compare_constants(report, frozen, require=require_frozen)
    report.timings["total"] = time.perf_counter() - start
    logger.info(
        f"{config.command}: {len(report.records)} records, {len(report.failures)} failed checks "
        f"in {report.timings['total']:.2f}s"
    )
    return report


def _cell(value):
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def emit_plot_data(report, table):
    """Flat CSV text of a report table.

    :param report: Report
    :param table: one of TABLE_COLUMNS
    :return: CSV with a header row, empty tables give the header alone
    :raises ExperimentError: for an unknown table
    """
    if table not in TABLE_COLUMNS:
        raise ExperimentError(f"Unknown table '{table}', known: {sorted(TABLE_COLUMNS)}")
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(TABLE_COLUMNS[table])
    for row in report.tables.get(table, []):
        writer.writerow([_cell(value) for value in row])
    return buffer.getvalue()


def _write(path, data):
    mode = "wb" if isinstance(data, bytes) else "w"
    encoding = None if isinstance(data, bytes) else "utf-8"
    with open(path, mode, encoding=encoding) as file:
        file.write(data)
    logger.debug(f"Wrote {path}")
    return path


def write_report(report, out_dir):
    """Write report.json, timings.json and one CSV per table.

    :return: list of written paths
    """
    os.makedirs(out_dir, exist_ok=True)
    paths = [
        _write(os.path.join(out_dir, REPORT_FILE), report.to_json()),
        _write(os.path.join(out_dir, TIMINGS_FILE), canonical_json(report.timings)),
    ]
    for table in sorted(report.tables):
        paths.append(_write(os.path.join(out_dir, f"{table}.csv"), emit_plot_data(report, table)))
    return paths


def freeze_constants(report, out_dir):
    """Merge the measured constants of a report into out_dir/constants.json."""
    path = os.path.join(out_dir, CONSTANTS_FILE)
    constants = load_constants(path) if os.path.exists(path) else {}
    constants.update({name: value for name, value in report.constants.items() if value is not None})
    os.makedirs(out_dir, exist_ok=True)
    logger.info(f"Freezing {sorted(report.constants)} to {path}")
    return _write(path, canonical_json({"constants": constants}))


def write_failure(out_dir, command, error, report=None):
    """Write the machine readable failure record failure.json."""
    record = {
        "command": command,
        "error": type(error).__name__,
        "message": str(error),
        "failures": report.failures if report is not None else [],
    }
    os.makedirs(out_dir, exist_ok=True)
    return _write(os.path.join(out_dir, FAILURE_FILE), canonical_json(record))
