import sys

import numpy as np
import pytest

from squeezelab import extreme


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def curve_half():
    return extreme.f_curve(0.5)


@pytest.fixture(scope="session")
def curve_one():
    return extreme.f_curve(1)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.summary_lines():
        terminalreporter.write_line(line)
