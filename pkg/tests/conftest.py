import sys
import math

import numpy as np
import pytest

from unstable_vortex.regularization import (
    RegularizedProfiles,
    build_mollifier,
    build_operators,
    fixed_point,
)
from unstable_vortex.vortex import build_vortex, eigenpair

EPS = 0.01


@pytest.fixture(scope="session")
def params():
    return build_vortex(2, 0.5, math.sqrt(2.0))[0]


@pytest.fixture(scope="session")
def ep(params):
    return eigenpair(params)


@pytest.fixture(scope="session")
def moll():
    return build_mollifier(64)


@pytest.fixture(scope="session")
def ops(params, moll):
    return build_operators(params, EPS, moll)


@pytest.fixture(scope="session")
def sol(params, ep, moll, ops):
    return fixed_point(params, ep, EPS, tol=1e-12, moll=moll, ops=ops)


@pytest.fixture(scope="session")
def prof(params, moll):
    return RegularizedProfiles(params, EPS, moll)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not getattr(mod, "RESULTS", None):
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.RESULTS:
        terminalreporter.write_line(line)
