from __future__ import annotations

from pathlib import Path

import pytest

DATA = Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def handcount_dir() -> Path:
    return DATA / "handcount"


@pytest.fixture(scope="session")
def two_cluster_dir() -> Path:
    return DATA / "two_cluster"


@pytest.fixture(scope="session")
def drift_dir() -> Path:
    return DATA / "drift"


@pytest.fixture(scope="session")
def demo_dir() -> Path:
    return DATA / "demo"


@pytest.fixture(scope="session")
def ig_fixture_dir() -> Path:
    return DATA / "ig_fixtures"


# one pass/fail line per acceptance criterion, echoed after the test run
ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def acceptance_log() -> list[str]:
    return ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
