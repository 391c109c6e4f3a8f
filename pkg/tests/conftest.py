import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

from levifold import catalog  # noqa: E402

CATALOG = ("sphere", "flat", "sheared_flat", "worm")


@pytest.fixture(scope="session")
def worm():
    return catalog("worm", {"R": 4.0})


@pytest.fixture(scope="session")
def flat():
    return catalog("flat")


@pytest.fixture(scope="session")
def sheared():
    return catalog("sheared_flat")


@pytest.fixture(scope="session")
def sphere():
    return catalog("sphere")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    lines = []
    for mod in list(sys.modules.values()):
        lines = getattr(mod, "ACCEPTANCE_RESULTS", None) or lines
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
