# vim: set filetype=python ts=4 sw=4
# -*- coding: utf-8 -*-
"""Helpers for running the command line in a child process."""
import json
import os
import subprocess

# Generous bound for a reduced experiment run in a child process.
PROCESS_TIMEOUT = 600


def run_process(proc, env=None):
    """Spawn a child process and wait for it.

    Arguments are converted to str, so paths can be passed as they are. The child
    gets the current environment, updated with env.

    :param proc: command and its arguments
    :param env: dict of extra environment variables
    :return: dict with stdout, stderr, exit status, and the command executed
    """
    command = [str(arg) for arg in proc]
    child_env = dict(os.environ)
    child_env.update(env or {})
    process = subprocess.run(
        command,
        capture_output=True,
        encoding="utf-8",
        env=child_env,
        timeout=PROCESS_TIMEOUT,
    )

    proc_status = {
        "stdout": process.stdout,
        "stderr": process.stderr,
        "name": " ".join(command),
        "exit_status": process.returncode,
    }
    return proc_status


def read_output(directory, name):
    """Load one JSON output file of a run.

    :param directory: output directory given with --out
    :param name: file name, such as report.json
    :return: decoded JSON
    """
    with open(os.path.join(directory, name), encoding="utf-8") as handle:
        return json.load(handle)
