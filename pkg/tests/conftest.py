import sys

import pytest

from thermoloop.thermal import ThermalParams


@pytest.fixture
def defaults():
    return ThermalParams()


@pytest.fixture
def no_leak():
    return ThermalParams(P_g=0.0)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
