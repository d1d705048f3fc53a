"""Shared fixtures: the worked 2x2 system and seeded Gaussian factories."""

import numpy as np
import pytest

from apc.ingest import partition_rows, synth_gaussian


def make_system(n, N, m, seed, mean=0.0):
    """Seeded Gaussian system partitioned into m row blocks."""
    A, b, x_star = synth_gaussian(n, N, mean, seed)
    return partition_rows(A, b, m, x_star)


def make_e1():
    """The 2x2 worked system: A = [[1,0],[1,1]], b = (1,2), x* = (1,1), m = 2."""
    A = np.array([[1.0, 0.0], [1.0, 1.0]])
    b = np.array([1.0, 2.0])
    return partition_rows(A, b, 2, x_star=np.array([1.0, 1.0]))


@pytest.fixture
def e1():
    return make_e1()


@pytest.fixture
def gauss_system():
    return make_system


acceptance_lines = []


def record_acceptance(line):
    """Collect one pass/fail line per acceptance criterion for the summary."""
    acceptance_lines.append(line)


def pytest_terminal_summary(terminalreporter):
    if acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in acceptance_lines:
            terminalreporter.write_line(line)
