# vim: set filetype=python ts=4 sw=4
# -*- coding: utf-8 -*-
"""Command line handling, configuration precedence and exit codes."""
import argparse
import builtins
import configparser
import json
import logging
import os
from pathlib import Path
from pkgutil import iter_modules
import platform
import re
import sys

import numpy as np
import scipy
from sparsedom import __title__
from sparsedom import __version__
from sparsedom import experiments
from sparsedom import presets
from sparsedom.config import Config
from sparsedom.config import config

logger = logging.getLogger(__name__)

EXIT_PASSED = 0
EXIT_FAILED = 1
EXIT_CONFIG = 2
# Settings an experiment file also carries. Given explicitly, they win over the file.
OVERRIDE_KEYS = ("seed", "resolution", "exact_oracles", "workers")
# Exception families library modules raise for hard failures.
HARD_FAILURES = (ArithmeticError, AssertionError, RuntimeError, ValueError)


def cmd_interface(args):
    """Sparsedom runs numerical checks of sparse domination for trilinear forms.

    :param args: list of command line arguments
    :return: exit code, 0 when every check passed
    """
    args = parse_cli_args(args)

    # Early logging, in case the user requests debugging via env/CLI
    setup_early_logging(args)

    overrides = process_options(args)

    # Late logging (default)
    setup_logging(config.user)

    if args.list_presets:
        for line in presets.list_presets():
            print(line)
        return EXIT_PASSED

    message = validate_configuration(config, args.command, args.experiment_file)
    if message:
        logger.error(
            f"Could not validate configuration: {'. '.join(message)}. "
            "Please check your settings, and try again."
        )
        sys.exit(EXIT_CONFIG)

    experiment = load_experiment(args.experiment_file, overrides)
    out_dir = config.experiments["out_dir"] or os.getcwd()
    return run_experiment(experiment, out_dir, freeze=args.freeze)


def parse_cli_args(args):
    """Parse command line arguments.

    :return: args parse object
    """
    parser = argparse.ArgumentParser(
        prog=__title__,
        description="Runs sparse domination experiments described by a JSON file.",
    )
    parser.add_argument(
        "command",
        nargs="?",
        choices=["run"],
        help="Run the experiment file given next.",
    )
    parser.add_argument("experiment_file", nargs="?", help="Experiment description in JSON.")
    parser.add_argument("--version", action="store_true", help="Displays version and exit")
    parser.add_argument(
        "--list-presets",
        action="store_true",
        help="List function, weight and multiplier presets with their parameters, and exit",
    )
    parser.add_argument(
        "--seed",
        dest="experiments_seed",
        type=lambda s: int(s, 0),
        help="Seed of the run, an integer in [0, 2**64). Overrides the experiment file.",
    )
    parser.add_argument(
        "--resolution",
        dest="experiments_resolution",
        type=lambda s: int(s, 0),
        help="Samples per unit window, a power of two of at least 64. Defaults to 4096.",
    )
    parser.add_argument(
        "--out",
        dest="experiments_out_dir",
        help="Directory for report.json and the CSV tables. Defaults to the current directory.",
    )
    parser.add_argument(
        "--exact-oracles",
        dest="experiments_exact_oracles",
        action="store_true",
        default=None,
        help="Enable exponential cost exact modes on small instances.",
    )
    parser.add_argument(
        "--workers",
        dest="experiments_workers",
        type=int,
        help="Threads running the cases of a batch.",
    )
    parser.add_argument(
        "--constants-file",
        dest="experiments_constants_file",
        help="Frozen regression constants to compare with. Defaults to the packaged ones.",
    )
    parser.add_argument(
        "--require-constants",
        dest="experiments_require_constants",
        action="store_true",
        default=None,
        help="Fail the regression constants that have no frozen value.",
    )
    parser.add_argument(
        "--freeze",
        action="store_true",
        help="Record the measured regression constants to constants.json in the output directory.",
    )
    parser.add_argument(
        "--profile",
        dest="user_config_profile",
        default=config.user["config_profile"],
        help="Sparsedom configuration profile to use.",
    )
    parser.add_argument(
        "--config-file",
        dest="user_config_file",
        default=config.user["config_file"],
        help=f"Use an alternative configuration file. Defaults to {config.user['config_file']}",
    )
    parser.add_argument(
        "--loglevel",
        "-l",
        type=lambda s: s.upper(),
        dest="user_loglevel",
        choices=["DEBUG", "INFO", "WARN", "ERROR"],
        help="[DEBUG|INFO|WARN|ERROR], default loglevel is INFO.",
    )
    parser.add_argument(
        "--log-output-file",
        dest="user_log_output_file",
        help="Optional file to log output to.",
    )
    parser.add_argument(
        "--quiet",
        dest="user_quiet",
        action="store_true",
        default=None,
        help="Suppress the summary line",
    )

    parsed_args = parser.parse_args(args)

    return parsed_args


def get_submodule_names():
    """Inspect the current module and find any submodules.

    :return: List of submodule names

    """
    package = Path(__file__).resolve(strict=True)
    submodules = [x.name for x in iter_modules([str(package.parent)])]
    return submodules


def setup_early_logging(args):
    """Do a best-effort attempt to enable early logging.

    :param args: list of arguments to parse
    :return: dict with values set
    """
    early_logging = config.get_defaults()["user"].copy()

    if "SPARSEDOM_USER_LOGLEVEL" in os.environ:
        early_logging["loglevel"] = os.environ["SPARSEDOM_USER_LOGLEVEL"]
    if "SPARSEDOM_USER_LOG_OUTPUT_FILE" in os.environ:
        early_logging["log_output_file"] = os.environ["SPARSEDOM_USER_LOG_OUTPUT_FILE"]

    if "user_loglevel" in args and args.user_loglevel:
        early_logging["loglevel"] = args.user_loglevel
    if "user_log_output_file" in args and args.user_log_output_file:
        early_logging["log_output_file"] = args.user_log_output_file

    setup_logging(early_logging)
    return early_logging


def setup_logging(conf):
    """Set logging level.

    :param conf: dictionary with config
    :return: loglevel name
    """
    root_logger = logging.getLogger()
    formatter = logging.Formatter(
        fmt="%(asctime)s %(levelname)s |%(name)s %(funcName)s():%(lineno)i| %(message)s"
    )
    handler = logging.StreamHandler()

    if "log_output_file" in conf and conf["log_output_file"]:
        handler = logging.FileHandler(conf["log_output_file"])
    handler.setFormatter(formatter)

    root_logger.handlers.clear()
    root_logger.addHandler(handler)

    # Pre-create a logger for each submodule, inheriting the root handler.
    submodules = [f"{__title__}.{x}" for x in get_submodule_names()]
    if "loglevel" in conf:
        conf["loglevel"] = conf["loglevel"].upper()
        for submodule in submodules:
            submodule_logger = logging.getLogger(submodule)
            try:
                submodule_logger.setLevel(conf["loglevel"])
            except ValueError as err:
                default = config.get_defaults()["user"]["loglevel"]
                root_logger.setLevel(default)
                for name in submodules:
                    logging.getLogger(name).setLevel(default)
                submodule_logger.warning(f"{err}. Please check your configuration and try again.")
                break
    loglevel = logging.getLogger(submodules[0]).getEffectiveLevel()
    return loglevel


def print(args):
    """Print to stdout unless the quiet flag is set."""
    if config.user["quiet"] is not True:
        builtins.print(args)


def display_version():
    """Print program version and exit."""
    python_version = platform.python_version()
    (system, _, release, _, _, _) = platform.uname()
    logger.debug(f"Display version: {__version__}")
    builtins.print(
        f"{__title__}/{__version__} "
        f"Python/{python_version} "
        f"{system}/{release} "
        f"numpy/{np.__version__} "
        f"scipy/{scipy.__version__}"
    )


def process_ini_file(file, profile):
    """Process options from a ConfigParser ini file.

    :param file: filename
    :param profile: profile to read
    :return: Config object with configuration values
    """
    res = {section: dict() for section in config.get_defaults()}
    pattern = re.compile(r"^(.*?)_(.*)")

    ini = configparser.RawConfigParser(default_section=config.user["config_profile"])
    # Here, group(1) is the dictionary key, and group(2) the configuration element
    try:
        ini.read(file)
        for key, val in ini.items(profile):
            match = re.search(pattern, key.lower())
            if match:
                res.setdefault(match.group(1), dict())[match.group(2)] = val
    except configparser.Error as err:
        logger.error(f"Could not load profile '{profile}': {str(err)}")
        sys.exit(EXIT_CONFIG)
    logger.debug(f"Found ini directives: {res}")

    try:
        config_ini = Config(**res)

    except (AttributeError, KeyError, ValueError) as err:
        logger.error(
            f"The configuration file {file} in [{profile}] is incorrect: {err}"
            ". Please check your settings and try again."
        )
        sys.exit(EXIT_CONFIG)
    return config_ini


def process_arguments(args):
    """Process command-line arguments.

    Flags that were not given are None and do not override anything.

    :param args: argparse object
    :return: Config object with configuration values
    """
    res = {section: dict() for section in config.get_defaults()}
    pattern = re.compile(r"^(.*?)_(.*)")

    for key, val in vars(args).items():
        match = re.search(pattern, key.lower())
        if match:
            if match.group(1) not in config.get_defaults():
                continue
            if val is not None:
                res.setdefault(match.group(1), dict())[match.group(2)] = val
    logger.debug(f"Found arguments: {res}")

    try:
        config_args = Config(**res)

    except (AttributeError, KeyError, ValueError) as err:
        logger.error(
            f"Command line arguments not correct: {err}"
            ". This should not happen, please contact the package maintainers."
        )
        sys.exit(EXIT_CONFIG)
    return config_args


def process_environment(prefix=__title__):
    """Process environment variables.

    :return: Config object with configuration values.
    """
    res = {section: dict() for section in config.get_defaults()}
    pattern = re.compile(rf"^({prefix})_(.*?)_(.*)")
    # Here, group(1) is the prefix variable, group(2) is the dictionary key,
    # and group(3) the configuration element.
    for key, val in os.environ.items():
        match = re.search(pattern, key.lower())
        if match and val:
            res.setdefault(match.group(2), dict())[match.group(3)] = val
    logger.debug(f"Found environment variables: {res}")

    try:
        config_env = Config(**res)

    except (AttributeError, KeyError, ValueError) as err:
        logger.error(
            f"The environment variables are incorrectly set: {err}"
            ". Please check your settings and try again."
        )
        sys.exit(EXIT_CONFIG)
    return config_env


def process_options(args):
    """Merge the INI profile, the environment and the arguments into the shared config.

    :param args: argparse object
    :return: dict of experiment settings given explicitly, which override the experiment file
    """
    if args.version:
        display_version()
        sys.exit(EXIT_PASSED)

    # 1: read ini file (if it exists)
    config_ini = process_ini_file(args.user_config_file, args.user_config_profile)

    # 2: override with ENV
    config_env = process_environment()

    # 3: override with args
    config_args = process_arguments(args)

    explicit = set()
    for source in (config_ini, config_env, config_args):
        explicit.update(source.experiments)
        config.update(source)

    sanitize_config_values(config)
    logger.debug(f"Final configuration is {config}")

    return {key: config.experiments[key] for key in OVERRIDE_KEYS if key in explicit}


def validate_configuration(config, command="run", experiment_file=None):
    """Ensure that configuration settings are sane before running anything.

    :param config: Config element with final configuration.
    :param command: the positional command, "run" or None
    :param experiment_file: path of the experiment description
    :return: message with validation issues.
    """
    message = []
    seed = config.experiments["seed"]
    resolution = config.experiments["resolution"]
    if not 0 <= seed < experiments.MAX_SEED:
        message.append(f"Seed {seed} is not in [0, 2**64)")
    if resolution < experiments.MIN_RESOLUTION or resolution & (resolution - 1):
        message.append(
            f"Resolution {resolution} is not a power of two of at least "
            f"{experiments.MIN_RESOLUTION}"
        )
    if config.experiments["workers"] < 1:
        message.append(f"Workers must be positive, got {config.experiments['workers']}")
    if command != "run" or not experiment_file:
        message.append(f"Nothing to do, use '{__title__} run <experiment.json>'")
    elif not os.path.isfile(experiment_file):
        message.append(f"Experiment file {experiment_file} not found")
    constants_file = config.experiments["constants_file"]
    if constants_file and not os.path.isfile(constants_file):
        message.append(f"Constants file {constants_file} not found")

    return message


def sanitize_config_values(config):
    """Adjust values that may need to be corrected.

    :param config: Config object to adjust
    :returns: modified object.
    """
    try:
        config.coerce()
    except ValueError as err:
        logger.error(f"{err}. Please check your settings and try again.")
        sys.exit(EXIT_CONFIG)

    # Expand any "~", if given by the user
    for section, key in (
        ("user", "config_dir"),
        ("user", "config_file"),
        ("user", "log_output_file"),
        ("experiments", "out_dir"),
        ("experiments", "constants_file"),
    ):
        if config.__dict__[section].get(key):
            config.__dict__[section][key] = os.path.expanduser(config.__dict__[section][key])

    return config


def load_experiment(path, overrides=None):
    """Read and validate an experiment file.

    :param path: JSON file
    :param overrides: explicit settings that win over the file
    :return: ExperimentConfig
    """
    try:
        with open(path, encoding=config.user["encoding"]) as file:
            data = json.load(file)
        experiment = experiments.ExperimentConfig.from_json(data, overrides)
    except (OSError, json.JSONDecodeError, experiments.ExperimentError) as err:
        logger.error(f"Experiment file {path} is not valid: {err}")
        sys.exit(EXIT_CONFIG)
    logger.debug(f"Experiment: {experiment.to_json()}")
    return experiment


def run_experiment(experiment, out_dir, freeze=False):
    """Run an experiment and write its report, or its failure record.

    :param experiment: ExperimentConfig
    :param out_dir: output directory
    :param freeze: record the measured regression constants
    :return: exit code
    """
    try:
        frozen = experiments.load_constants(config.experiments["constants_file"])
    except experiments.ExperimentError as err:
        logger.error(f"{err}. Please check your settings and try again.")
        sys.exit(EXIT_CONFIG)

    try:
        report = experiments.run(
            experiment, frozen, require_frozen=config.experiments["require_constants"]
        )
    except HARD_FAILURES as err:
        path = experiments.write_failure(out_dir, experiment.command, err)
        logger.error(f"{experiment.command} aborted: {type(err).__name__}: {err}. See {path}")
        return EXIT_FAILED

    experiments.write_report(report, out_dir)
    if freeze:
        experiments.freeze_constants(report, out_dir)

    if not report.passed:
        error = experiments.AssertionFailure(report)
        path = experiments.write_failure(out_dir, experiment.command, error, report)
        logger.error(f"{experiment.command}: {error}. See {path}")
        return EXIT_FAILED

    print(
        f"{experiment.command}: passed, {len(report.records)} records, "
        f"report {report.digest()[:16]} in {out_dir}"
    )
    return EXIT_PASSED
