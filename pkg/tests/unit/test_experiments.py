# vim: set filetype=python ts=4 sw=4
# -*- coding: utf-8 -*-
"""Unit tests, and local fixtures for the experiments module."""
from fractions import Fraction
import json

import pytest


def quick(command, **values):
    """Return a validated experiment at a small resolution."""
    from sparsedom.experiments import ExperimentConfig

    data = {"command": command, "resolution": 256, "cases": 2}
    data.update(values)
    return ExperimentConfig.from_json(data)


def test_canonical_json():
    """Test sorted keys, exact fractions, complex pairs and the trailing newline."""
    from sparsedom.experiments import canonical_json

    text = canonical_json({"b": Fraction(3, 2), "a": (1, 2.5), "c": 1 + 2j, "d": True})
    assert text.endswith(b"\n")
    assert json.loads(text) == {"a": [1, 2.5], "b": "3/2", "c": [1.0, 2.0], "d": True}
    assert text.index(b'"a"') < text.index(b'"b"') < text.index(b'"c"')


def test_jsonable_non_finite():
    """Test that non finite floats are written as strings."""
    import numpy as np

    from sparsedom.experiments import jsonable

    assert jsonable([np.float64("inf"), float("nan"), np.int64(3)]) == ["inf", "nan", 3]
    assert jsonable(np.array([1.0, 2.0])) == [1.0, 2.0]


def test_case_seeds():
    """Test that case seeds are reproducible and distinct."""
    from sparsedom.experiments import case_seeds

    seeds = case_seeds(0, 20)
    assert seeds == case_seeds(0, 20)
    assert case_seeds(0, 5) == seeds[:5]
    assert len(set(seeds)) == 20
    assert case_seeds(1, 20) != seeds
    assert all(isinstance(seed, int) for seed in seeds)


def test_config_defaults():
    """Test that missing entries take the defaults of the command."""
    from sparsedom.experiments import ExperimentConfig
    from sparsedom.grid import ExponentTuple

    config = ExperimentConfig.from_json({"command": "domination-check"})
    assert config.seed == 0
    assert config.resolution == 4096
    assert config.cases == 20
    assert config.exponents == ExponentTuple(Fraction(3, 2), Fraction(3, 2), 3)
    assert len(config.multipliers) == 9
    assert config.params["uniformity"] == 5.0
    assert config.workers == 1


def test_config_overrides():
    """Test that explicit settings win over the experiment file."""
    from sparsedom.experiments import ExperimentConfig

    data = {"command": "sparse-build", "seed": 3, "params": {}}
    config = ExperimentConfig.from_json(data, {"seed": 7, "workers": 4})
    assert config.seed == 7
    assert config.workers == 4
    assert "workers" not in config.to_json()
    assert config.to_json()["exponents"] == ["3/2", "3/2", "3"]


@pytest.mark.parametrize(
    "data",
    [
        ["identity-suite"],
        {"command": "identity-suite", "pytest": 1},
        {"command": "pytest"},
        {"command": "identity-suite", "seed": -1},
        {"command": "identity-suite", "seed": 2**64},
        {"command": "identity-suite", "seed": 1.5},
        {"command": "identity-suite", "resolution": 100},
        {"command": "identity-suite", "resolution": 32},
        {"command": "identity-suite", "cases": 0},
        {"command": "identity-suite", "exact_oracles": "yes"},
        {"command": "identity-suite", "exponents": ["1", "1", "1"]},
        {"command": "identity-suite", "exponents": ["2", "2"]},
        {"command": "identity-suite", "exponents": ["1/2", "2", "2"]},
        {"command": "identity-suite", "holder": ["1", "2"]},
        {"command": "outer-holder", "holder": ["6/5", "6/5"]},
        {"command": "identity-suite", "functions": ["bump", "bump"]},
        {"command": "identity-suite", "functions": ["bump", "bump", "pytest"]},
        {"command": "weighted-bound", "weights": ["bump"]},
        {"command": "domination-check", "multipliers": [{"preset": "bht_sign", "size": 2}]},
        {"command": "identity-suite", "params": {"pytest": 1}},
        {"command": "identity-suite", "params": []},
    ],
)
def test_config_failure(data):
    """Test that schema violations are refused before any run."""
    from sparsedom.experiments import ExperimentConfig
    from sparsedom.experiments import ExperimentError

    with pytest.raises(ExperimentError):
        ExperimentConfig.from_json(data)


def test_config_failure_lists_every_problem():
    """Test that all problems of a file are reported together."""
    from sparsedom.experiments import ExperimentConfig
    from sparsedom.experiments import ExperimentError

    with pytest.raises(ExperimentError) as err:
        ExperimentConfig.from_json({"command": "sparse-build", "seed": -1, "resolution": 100})
    assert "Seed" in str(err.value)
    assert "Resolution" in str(err.value)


def test_sharpness_holder_pair():
    """Test that the sharpness pair is accepted although it has no Hoelder dual."""
    from sparsedom.experiments import ExperimentConfig

    config = ExperimentConfig.from_json({"command": "sharpness"})
    assert config.holder == (Fraction(6, 5), Fraction(6, 5))


def test_report_check():
    """Test that failed checks carry both sides and their details."""
    from sparsedom import __version__
    from sparsedom.experiments import AssertionFailure
    from sparsedom.experiments import Report

    report = Report("pytest", {})
    assert report.check("holds", 1.0, 2.0, True) is True
    assert report.passed
    assert report.check("fails", 3.0, 2.0, False, case=4) is False
    assert report.failures == [{"check": "fails", "lhs": 3.0, "rhs": 2.0, "case": 4}]
    assert not report.passed

    data = json.loads(report.to_json())
    assert data["sparsedom"] == __version__
    assert data["passed"] is False
    assert "timings" not in data
    assert "fails" in str(AssertionFailure(report))


def test_report_digest_ignores_timings():
    """Test that run times do not change the report digest."""
    from sparsedom.experiments import Report

    first = Report("pytest", {"seed": 0})
    second = Report("pytest", {"seed": 0}, timings={"total": 1.0})
    assert first.digest() == second.digest()
    assert len(first.digest()) == 64


def test_emit_plot_data():
    """Test the CSV header, float formatting and unknown tables."""
    from sparsedom.experiments import emit_plot_data
    from sparsedom.experiments import ExperimentError
    from sparsedom.experiments import Report

    report = Report("pytest", {})
    assert emit_plot_data(report, "sharpness") == "M,lower_bound\n"
    assert emit_plot_data(report, "superlevel") == "lambda,measure\n"
    report.tables["ratios"] = [[0, 0.5], [1, 1 / 3]]
    assert emit_plot_data(report, "ratios") == "case,ratio\n0,0.5\n1,0.3333333333333333\n"
    with pytest.raises(ExperimentError):
        emit_plot_data(report, "pytest")


def test_compare_constants():
    """Test the relative tolerance of regression constants and null entries."""
    from sparsedom.experiments import compare_constants
    from sparsedom.experiments import Report

    report = Report("pytest", {})
    report.constants = {"domination": 1.05, "embedding": 2.0, "weighted": 3.0}
    frozen = {"domination": 1.0, "embedding": None, "weighted": 2.0}
    regression = compare_constants(report, frozen)
    assert regression["domination"]["compared"] is True
    assert regression["embedding"]["compared"] is False
    assert [failure["check"] for failure in report.failures] == ["regression_weighted"]
    assert report.summary["regression"] == regression


def test_compare_constants_required():
    """Test that an unfrozen constant fails when frozen values are required."""
    from sparsedom.experiments import compare_constants
    from sparsedom.experiments import Report

    report = Report("pytest", {})
    report.constants = {"domination": 123.0, "outer_holder": 1e9}
    regression = compare_constants(report, {"domination": None}, require=True)
    assert [entry["compared"] for entry in regression.values()] == [False, False]
    assert [failure["check"] for failure in report.failures] == [
        "regression_domination",
        "regression_outer_holder",
    ]
    assert report.passed is False


def test_packaged_constants_cover_every_measured_name():
    """Test that constants.json has an entry for every constant a command measures."""
    from sparsedom.experiments import load_constants

    assert set(load_constants()) == {
        "almost_localization_l2",
        "almost_localization_sup",
        "domination",
        "embedding",
        "multiplier_domination",
        "outer_holder",
        "weighted",
    }


def test_freeze_then_compare(tmp_path):
    """Test that frozen constants read back are compared, and a moved value fails."""
    from sparsedom.experiments import compare_constants
    from sparsedom.experiments import freeze_constants
    from sparsedom.experiments import load_constants
    from sparsedom.experiments import Report

    report = Report("pytest", {})
    report.constants = {"domination": 2.0, "embedding": None}
    frozen = load_constants(freeze_constants(report, str(tmp_path)))
    assert frozen == {"domination": 2.0}

    regression = compare_constants(report, frozen, require=True)
    assert regression["domination"]["compared"] is True
    assert [failure["check"] for failure in report.failures] == ["regression_embedding"]

    moved = Report("pytest", {})
    moved.constants = {"domination": 2.5}
    compare_constants(moved, frozen, require=True)
    assert [failure["check"] for failure in moved.failures] == ["regression_domination"]


def test_load_constants(tmpdir):
    """Test the packaged constants and unreadable files."""
    from sparsedom.experiments import ExperimentError
    from sparsedom.experiments import load_constants

    constants = load_constants()
    assert {"domination", "multiplier_domination", "outer_holder"} <= set(constants)

    path = tmpdir.join("constants.json")
    path.write("[]")
    with pytest.raises(ExperimentError):
        load_constants(str(path))
    with pytest.raises(ExperimentError):
        load_constants(str(tmpdir.join("missing.json")))


def test_write_report_and_freeze(tmp_path):
    """Test the files written for a report and the merge of frozen constants."""
    from sparsedom.experiments import freeze_constants
    from sparsedom.experiments import load_constants
    from sparsedom.experiments import Report
    from sparsedom.experiments import write_failure
    from sparsedom.experiments import write_report

    report = Report("pytest", {}, timings={"total": 0.5})
    report.tables["ratios"] = [[0, 1.5]]
    report.constants = {"domination": 1.5, "embedding": None}
    paths = write_report(report, tmp_path)
    assert sorted(path.rsplit("/", 1)[-1] for path in map(str, paths)) == [
        "ratios.csv",
        "report.json",
        "timings.json",
    ]
    assert json.loads((tmp_path / "timings.json").read_text()) == {"total": 0.5}

    (tmp_path / "constants.json").write_text('{"constants": {"weighted": 0.9}}')
    freeze_constants(report, tmp_path)
    assert load_constants(str(tmp_path / "constants.json")) == {
        "domination": 1.5,
        "weighted": 0.9,
    }

    write_failure(tmp_path, "pytest", RuntimeError("depth"))
    failure = json.loads((tmp_path / "failure.json").read_text())
    assert failure["error"] == "RuntimeError"
    assert failure["message"] == "depth"


def test_run_identity_suite():
    """Test that the exact identities and the Fourier identity hold."""
    from sparsedom.experiments import run

    report = run(quick("identity-suite"), frozen={})
    assert report.passed, report.failures
    checks = [record["check"] for record in report.records]
    assert checks.count("fourier_identity") == 2
    assert "theorem_constant" in checks
    assert report.summary["checks"] == report.summary["passed"] == len(checks)
    assert len(report.timings["cases"]) == 2


def test_run_is_deterministic():
    """Test that the worker count and repeated runs give the same report."""
    from sparsedom.experiments import ExperimentConfig
    from sparsedom.experiments import run

    data = {"command": "identity-suite", "resolution": 256, "cases": 3, "seed": 12345}
    first = run(ExperimentConfig.from_json(data), frozen={})
    second = run(ExperimentConfig.from_json(data, {"workers": 3}), frozen={})
    assert first.to_json() == second.to_json()
    other = run(ExperimentConfig.from_json(data, {"seed": 54321}), frozen={})
    assert other.digest() != first.digest()


def test_run_sparse_build():
    """Test the sparse table and the certified sparseness of every grid."""
    from sparsedom.experiments import run

    report = run(quick("sparse-build"), frozen={})
    assert len(report.tables["sparse"]) == 6
    assert [row[1] for row in report.tables["sparse"]] == [0, 1, 2, 0, 1, 2]
    assert report.summary["min_eta"] >= 0.5
    assert report.summary["min_tripled_eta"] >= 1 / 6


def test_run_domination_check_shares_collection():
    """Test that every rank 1 collection is checked against one sparse collection."""
    from sparsedom.experiments import run

    config = quick(
        "domination-check",
        resolution=1024,
        cases=3,
        functions=["random_smooth"] * 3,
        multipliers=["bht_sign"],
    )
    report = run(config, frozen={})
    assert len(report.tables["ratios"]) == 3
    assert len(report.summary["collection_digests"]) == 1
    assert "domination" in report.constants
    assert "multiplier_domination" in report.constants
    assert report.summary["regression"]["domination"]["compared"] is False


def test_run_localization():
    """Test that the localization ratios are measured as regression constants."""
    from sparsedom.experiments import run

    report = run(quick("localization", resolution=1024, cases=2), frozen={})
    assert report.passed, report.failures
    assert len(report.records) == 2
    assert report.summary["max_inner_product"] <= 1e-10
    for name in ("almost_localization_sup", "almost_localization_l2"):
        assert report.constants[name] > 0
        assert report.summary["regression"][name]["compared"] is False

    frozen = dict(report.constants)
    again = run(quick("localization", resolution=1024, cases=2), frozen=frozen, require_frozen=True)
    assert again.passed, again.failures
    assert again.summary["regression"]["almost_localization_l2"]["compared"] is True


def test_run_vector_valued_range_search(mocker):
    """Test that every range verdict is checked against the lattice search."""
    from sparsedom import experiments

    report = experiments.run(quick("vector-valued", cases=1), frozen={})
    summary = report.summary
    assert summary["range_points"] == 100
    assert summary["range_found"] == summary["range_holds"]
    assert all(record["holds"] == record["found"] for record in summary["range"])
    assert not [item for item in report.failures if item["check"] == "corvv_search"]

    mocker.patch.object(experiments, "corvv_lattice_search", return_value=True)
    report = experiments.run(quick("vector-valued", cases=1), frozen={})
    mismatched = [item for item in report.failures if item["check"] == "corvv_search"]
    assert len(mismatched) == 100 - report.summary["range_holds"]
    assert not report.passed


def test_run_sharpness_table():
    """Test the sharpness table and its CSV."""
    from sparsedom.experiments import emit_plot_data
    from sparsedom.experiments import run

    config = quick(
        "sharpness",
        params={"sizes": [1, 2], "seeds": [0], "decay_sizes": [1, 2]},
    )
    report = run(config, frozen={})
    assert [row[0] for row in report.tables["sharpness"]] == [1, 2]
    lines = emit_plot_data(report, "sharpness").splitlines()
    assert lines[0] == "M,lower_bound"
    assert len(lines) == 3


def test_run_failure_propagates(mocker):
    """Test that hard module failures reach the caller."""
    from sparsedom import experiments

    mocker.patch.object(
        experiments.COMMANDS["sparse-build"], "runner", side_effect=RuntimeError("depth")
    )
    with pytest.raises(RuntimeError):
        experiments.run(quick("sparse-build"), frozen={})


def test_documented_experiment_files():
    """Test that the experiment files shipped with the documentation validate."""
    import glob
    import os

    from sparsedom.experiments import COMMANDS
    from sparsedom.experiments import ExperimentConfig

    root = os.path.dirname(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
    paths = sorted(glob.glob(os.path.join(root, "docs", "experiments", "*.json")))
    assert paths
    for path in paths:
        with open(path, encoding="utf-8") as file:
            config = ExperimentConfig.from_json(json.load(file))
        assert config.command in COMMANDS
