import numpy as np
import pytest

from dispersal_lab.grid import build_grid

M_TEXT = "1 + 0.5*cos(3.141592653589793*x)"


def m_profile(grid):
    return grid.field(1.0 + 0.5 * np.cos(np.pi * grid.nodes))


@pytest.fixture(scope="session")
def grid401():
    return build_grid(1.0, 401)


@pytest.fixture(scope="session")
def grid201():
    return build_grid(1.0, 201)


@pytest.fixture(scope="session")
def m401(grid401):
    return m_profile(grid401)


@pytest.fixture(scope="session")
def m201(grid201):
    return m_profile(grid201)


# one line per acceptance criterion, echoed after the run
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
