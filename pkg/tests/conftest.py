import numpy as np
import pytest

from replica_es import model


@pytest.fixture
def dimer8():
    g = model.build_chain(8, "dimer_bulk", 1.0, 2.0)
    return g, model.bipartition_half(g)


@pytest.fixture
def ring4():
    g = model.build_chain(4, "uniform", 1.0, 1.0)
    return g, model.bipartition_half(g)


def ring4_energy(beta):
    """Closed form for the 4-site Heisenberg ring: H = (S^2 - S13^2 - S24^2) / 2."""
    levels = np.array([-2.0] + [-1.0] * 3 + [1.0] * 5 + [0.0] * 7)
    w = np.exp(-beta * levels)
    return float(np.sum(levels * w) / np.sum(w))


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
