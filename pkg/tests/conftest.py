import numpy as np
import pytest

from vfdrelay import phy

# one line per acceptance criterion, filled by tests/test_acceptance.py and
# echoed after the run so the verdicts survive output capture
ACCEPTANCE_REPORT: list[str] = []


@pytest.fixture(scope="session")
def cmap() -> phy.Constellation:
    return phy.qpsk()


@pytest.fixture()
def rng() -> np.random.Generator:
    return np.random.default_rng(0xC0FFEE)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_REPORT:
        terminalreporter.write_sep("-", "acceptance criteria")
        for line in ACCEPTANCE_REPORT:
            terminalreporter.write_line(line)
