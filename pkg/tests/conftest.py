import os
import sys

import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, os.path.dirname(__file__))

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

P30 = 2**30 + 3


@pytest.fixture
def p30():
    return P30


def pytest_terminal_summary(terminalreporter):
    gate = sys.modules.get("test_acceptance")
    if gate is None or not gate.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(gate.RESULTS):
        terminalreporter.write_line(line)
