"""Shared fixtures and the acceptance summary printed at the end of the run."""

from __future__ import annotations

import pytest

CRITERIA: dict = {}


def record(number: int, passed: bool, detail: str) -> None:
    """Remember the outcome of an acceptance criterion and echo it."""
    line = f"CRITERION {number:>2}: {'PASS' if passed else 'FAIL'} | {detail}"
    CRITERIA[number] = line
    print(line)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(CRITERIA):
        terminalreporter.write_line(CRITERIA[k])


@pytest.fixture(scope="session")
def zf1_report():
    from pottsmeta.landscape import classify_regime
    from pottsmeta.model import ModelParams

    return classify_regime(ModelParams(2.4))


@pytest.fixture(scope="session")
def zf2_report():
    from pottsmeta.landscape import classify_regime
    from pottsmeta.model import ModelParams

    return classify_regime(ModelParams(1.86))
