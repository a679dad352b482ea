# vim: set filetype=python ts=4 sw=4
# -*- coding: utf-8 -*-
"""pytest configuration, hooks, and global fixtures."""
import json

import pytest


def pytest_addoption(parser):
    """Add command-line options for the acceptance suites."""
    parser.addoption(
        "--full-suite",
        action="store_true",
        default=False,
        help="Run the acceptance suites at their documented sizes.",
    )
    parser.addoption(
        "--freeze-constants",
        action="store_true",
        default=False,
        help="With --full-suite, record measured regression constants in the packaged file.",
    )
    parser.addoption(
        "--tool-config-file",
        default="/dev/null",
        help="Sets an optional config file to read from",
    )


@pytest.fixture(scope="session")
def full_suite(request):
    """Return True when the acceptance suites run at full size."""
    return request.config.getoption("--full-suite")


@pytest.fixture(scope="session")
def freeze_packaged(request):
    """Return True when full size runs rewrite the packaged regression constants."""
    return request.config.getoption("--freeze-constants")


@pytest.fixture
def custom_args(request):
    """Return the configuration file option given to pytest, as CLI arguments."""
    return ["--config-file", request.config.getoption("--tool-config-file")]


@pytest.fixture(scope="session")
def config_file(tmp_path_factory):
    """Generate a path for a temporary ini file that multiple tests can share."""
    path = tmp_path_factory.mktemp("pytest") / "pytest.ini"
    return path


@pytest.fixture
def experiment_file(tmp_path):
    """Return a function writing an experiment description to a temporary JSON file."""

    def write(data, name="experiment.json"):
        path = tmp_path / name
        path.write_text(json.dumps(data), encoding="utf-8")
        return str(path)

    return write


@pytest.fixture
def small_window():
    """Return a zero function with 256 cells on [0, 1)."""
    from sparsedom.presets import sampled_window

    return sampled_window(256)


@pytest.fixture
def bump_triple(small_window):
    """Return an indicator and two bumps on the small window."""
    from sparsedom.presets import resolve

    return [
        resolve("function", "indicator", small_window),
        resolve("function", "bump", small_window),
        resolve("function", {"preset": "bump", "center": 0.4, "radius": 0.3}, small_window),
    ]


@pytest.fixture(scope="session")
def rank1_collection():
    """Return a small two scale rank 1 collection."""
    from sparsedom.tiles import generate_rank1

    return generate_rank1(seed=0, scales=(-1, 0), density=1)
