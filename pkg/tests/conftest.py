from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

from fxbench.tickdata import synthesize_series

# compiled kernels make first calls slow; deadlines would only measure JIT time
settings.register_profile("fxbench", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("fxbench")

DATA = Path(__file__).parent / "data"


@pytest.fixture
def fixture_ticks():
    return DATA / "truefx_10.csv"


@pytest.fixture
def walk():
    return synthesize_series(3, 2000, vol=2e-5)


def pytest_terminal_summary(terminalreporter):
    from helpers import ACCEPTANCE

    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)
