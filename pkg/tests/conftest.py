"""Shared fixtures.

The expensive trained-flow fixture is session-scoped and cached as a
checkpoint under the pytest cache directory so repeated runs of the
acceptance suite skip retraining.
"""

import sys

import numpy as np
import pytest

from verletflow import VerletFlow


def pytest_terminal_summary(terminalreporter):
    """Echo the acceptance criterion lines after the test summary."""
    mod = sys.modules.get("tests.test_acceptance") or sys.modules.get(
        "test_acceptance"
    )
    lines = getattr(mod, "ACCEPTANCE_LINES", None) if mod else None
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(0)


@pytest.fixture
def small_flow():
    """A random order-1 flow on 2+2 dims with small nets."""
    return VerletFlow.create(2, 2, order=1, hidden=[8], seed=7)


@pytest.fixture
def identity_flow():
    """A flow whose field is identically zero (output layers zeroed)."""
    return VerletFlow.create(2, 2, order=1, hidden=[8], seed=7).zero_()
