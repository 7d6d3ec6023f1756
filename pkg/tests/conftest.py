"""Shared fixtures: one calibration and characterization per session."""

import pytest

from retrysim.calibrate import calibrate
from retrysim.ecc import EccConfig
from retrysim.nand import OperatingCondition, default_params
from retrysim.retry import build_retry_table, characterize_best_tr
from retrysim.workload import PRESETS, generate

#: The retention-age x wear grid used for characterization throughout.
GRID = tuple(
    OperatingCondition(days, pec)
    for days in (0.0, 30.0, 90.0, 180.0, 365.0)
    for pec in (0, 500, 1000, 1500)
)


@pytest.fixture(scope="session")
def calibrated_params():
    return calibrate(default_params())


@pytest.fixture(scope="session")
def retry_table():
    return build_retry_table()


@pytest.fixture(scope="session")
def best_tr(calibrated_params, retry_table):
    ecc = EccConfig(deterministic_mode=True, guardband_sigmas=6.0)
    return characterize_best_tr(calibrated_params, GRID, retry_table, ecc)


@pytest.fixture(scope="session")
def read90_trace():
    return generate(PRESETS["read90"], seed=7)


_ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def acceptance_report():
    """Collector the acceptance tests append their verdict lines to."""
    return _ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
