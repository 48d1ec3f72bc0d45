import pytest

from hybridcomp.config import DESK
from hybridcomp.scenario import build_scenario

# acceptance tests append "criterion N: PASS/FAIL ..." lines here
CRITERIA: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(CRITERIA):
        terminalreporter.write_line(CRITERIA[n])


@pytest.fixture
def desk():
    return DESK


@pytest.fixture
def desk_scenario():
    return build_scenario(DESK, 0)
