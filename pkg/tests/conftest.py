import sys

import numpy as np
import pytest

from corrugate.geometry import make_catalog_curve
from corrugate.metric import MetricSpec

HELIX = {"a": 0.1, "b": 0.05}


@pytest.fixture
def helix():
    return make_catalog_curve("helix", HELIX)


@pytest.fixture
def g2():
    return MetricSpec.constant(2.0)


@pytest.fixture
def half_line():
    """Line with speed 0.5 along e1; with g = 1.25 the amplitude is r = 1."""
    return make_catalog_curve("line", {"dx": 0.5, "dy": 0, "dz": 0})


@pytest.fixture
def unit_amplitude():
    return MetricSpec.constant(1.25)


@pytest.fixture
def ramp_metric():
    """g = 0.25 + u^2 on the half-speed line, so r(u) = u."""
    return MetricSpec.polynomial([0.25, 0.0, 1.0])


def helix_speed(a=0.1, b=0.05):
    return np.sqrt((2 * np.pi * a) ** 2 + b ** 2)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(mod.RESULTS, key=lambda k: int(k.split()[0][1:])):
        terminalreporter.write_line(mod.format_line(name, *mod.RESULTS[name]))
