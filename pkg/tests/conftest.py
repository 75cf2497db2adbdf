import numpy as np
import pytest

from augca.domain import AugmentationMatrix

TWO_BY_THREE = [[0.5, 0.5, 0.0], [0.0, 0.5, 0.5]]


@pytest.fixture
def small():
    return AugmentationMatrix(TWO_BY_THREE)


def central_difference(fn, x, h=1e-5):
    """Gradient of a scalar function by central differences, one coordinate at a time."""
    x = np.array(x, dtype=float)
    g = np.zeros_like(x)
    for i in range(x.size):
        xp, xm = x.copy(), x.copy()
        xp.flat[i] += h
        xm.flat[i] -= h
        g.flat[i] = (fn(xp) - fn(xm)) / (2 * h)
    return g


def rel_err(a, b):
    return np.linalg.norm(a - b) / max(np.linalg.norm(a), np.linalg.norm(b), 1e-12)


# one line per acceptance criterion, printed after the test session
ACCEPTANCE_LINES: list[tuple[int, str]] = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(line)
