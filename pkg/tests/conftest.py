import numpy as np
import pytest

from eigenpath.paths import EigenpathTracker, OperatorPath

SX = np.array([[0, 1], [1, 0]], dtype=complex)
SZ = np.array([[1, 0], [0, -1]], dtype=complex)


def rotation_path(a: float) -> OperatorPath:
    """Ground state cos(a s)|0> + sin(a s)|1>, gap 2 everywhere."""
    def h(s):
        th = 2 * a * s
        return -(np.cos(th) * SZ + np.sin(th) * SX)

    def dh(s):
        th = 2 * a * s
        return -2 * a * (-np.sin(th) * SZ + np.cos(th) * SX)

    return OperatorPath(h, dh, name="rotation")


def constant_path(h) -> OperatorPath:
    h = np.asarray(h, dtype=complex)
    zero = np.zeros_like(h)
    return OperatorPath(lambda s: h, lambda s: zero, name="constant")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def ground():
    return EigenpathTracker(rule="smallest")


# one summary line per acceptance criterion, filled by test_acceptance.py
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
