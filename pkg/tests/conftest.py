import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from teamsub.io import fixture_path, load_lqg, load_team  # noqa: E402

_CRITERIA = []


def record_criterion(number, ok, detail=""):
    line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    _CRITERIA.append((number, line))
    print(line)


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(_CRITERIA):
            terminalreporter.write_line(line)


@pytest.fixture
def zero_cost():
    return load_team(fixture_path("zero_cost_team"))


@pytest.fixture
def shared_column():
    return load_team(fixture_path("shared_column_team"))


@pytest.fixture
def four_member():
    return load_team(fixture_path("four_member"))


@pytest.fixture
def lqg_scalar():
    return load_lqg(fixture_path("lqg_scalar"))
