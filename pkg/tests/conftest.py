from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

from inexopt.cli import build, load_config
from inexopt.problems import make_sparse_regression

CONFIG_DIR = Path(__file__).resolve().parents[1] / "src" / "inexopt" / "configs"

SHIPPED = {
    "ipg": "ipg_l1.ini",
    "ipalm": "palm_block.ini",
    "pire": "pire_log.ini",
    "idc": "dc_huber.ini",
    "iadmm": "admm_quadratic.ini",
}

_acceptance = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(number, title): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None or report.when != "call" and not report.failed:
        return
    number, title = marker.args
    passed, _ = _acceptance.get(number, (True, title))
    _acceptance[number] = (passed and not report.failed, title)


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_acceptance):
        passed, title = _acceptance[number]
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  {number:2d}. {title}")


def shipped_path(scheme):
    return CONFIG_DIR / SHIPPED[scheme]


def run_shipped(scheme, **overrides):
    """Run a shipped configuration; ``overrides`` replace SolverConfig fields."""
    problem, solve, config = build(load_config(shipped_path(scheme)))
    if overrides:
        config = replace(config, **overrides)
    trace, constants = solve(problem, config)
    return problem, config, trace, constants


@pytest.fixture(scope="session")
def shipped_runs():
    return {scheme: run_shipped(scheme) for scheme in SHIPPED}


@pytest.fixture
def small_lasso():
    return make_sparse_regression(10, 8, 3, 0.1, "l1", seed=11)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
