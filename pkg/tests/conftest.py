import numpy as np
import pytest

from flowdyn.flow import FlowField


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_field(rng, h=None, w=None, scale=3.0, stride=1):
    h = h or int(rng.integers(1, 24))
    w = w or int(rng.integers(1, 24))
    return FlowField(rng.normal(0, scale, (h, w)), rng.normal(0, scale, (h, w)), stride)


ACCEPTANCE_LINES: list = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
