"""Shared fixtures for the currlab test suite."""

import numpy as np
import pytest

from currlab.data import SyntheticSpec, gen_synthetic

ACCEPTANCE_LINES = []


def record_acceptance(line):
    """Collect acceptance-criterion verdicts for the terminal summary."""
    ACCEPTANCE_LINES.append(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def tiny_dataset():
    """Small easy-ish synthetic task used by several unit tests."""
    return gen_synthetic(SyntheticSpec(4, 25, 16, (0.5, 3.0), seed=7))


@pytest.fixture(scope="session")
def easy_dataset():
    """Nearly separable task (wide margins, small cluster spread)."""
    return gen_synthetic(SyntheticSpec(4, 50, 16, (5.0, 5.0), seed=3,
                                       noise_sigma=0.5))


@pytest.fixture()
def rng():
    return np.random.default_rng(0)
