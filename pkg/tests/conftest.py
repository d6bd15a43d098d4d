from __future__ import annotations

import numpy as np
import pytest

from qcprop import catalog
from qcprop.dynamics import BoundaryData
from qcprop.geometry import PhaseSpaceGeometry


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def su2_case():
    return PhaseSpaceGeometry.sphere(2), catalog.su2_linear(), BoundaryData(0.4, -0.1 + 0.5j, 1.0)


@pytest.fixture
def footnote2_case():
    return PhaseSpaceGeometry.sphere(5), catalog.footnote2(), BoundaryData(0.3, 0.2, 0.5)


@pytest.fixture
def oscillator_case():
    return PhaseSpaceGeometry.plane(1.0), catalog.oscillator(1.3), BoundaryData(0.5 + 0.2j, 0.3 - 0.6j, 0.9)


def random_points(rng, n, radius=1.5):
    r = radius * np.sqrt(rng.uniform(size=n))
    return r * np.exp(2j * np.pi * rng.uniform(size=n))


ACCEPTANCE_LINES: dict[int, str] = {}


@pytest.fixture
def report():
    """Record one summary line per acceptance criterion."""
    def record(number: int, passed: bool, detail: str) -> None:
        line = f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES[number] = line
        print(line)
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
