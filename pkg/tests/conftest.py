from pathlib import Path

import numpy as np
import pytest

from transbem.formulations import assemble_operators
from transbem.mesh import Scene, generate_icosphere

FIXTURES = Path(__file__).parent / "fixtures"
RADIUS = 0.005


def pytest_configure(config):
    config.criteria_lines = []


def pytest_terminal_summary(terminalreporter, config):
    if config.criteria_lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(config.criteria_lines, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def criterion(request):
    """Record one pass/fail line per acceptance criterion and return the verdict."""

    def record(number, ok, detail):
        line = f"criterion {number} {'PASS' if ok else 'FAIL'}: {detail}"
        print(line)
        request.config.criteria_lines.append(line)
        return ok

    return record


@pytest.fixture(scope="session")
def fixtures():
    return FIXTURES


@pytest.fixture(scope="session")
def coarse_sphere():
    return generate_icosphere(RADIUS, 2)


@pytest.fixture(scope="session")
def fat_ops(coarse_sphere):
    """Water-fat sphere at 250 kHz on the 162-node mesh (about 3 elements per wavelength)."""
    return assemble_operators(Scene([coarse_sphere], "water", ["fat"]), 250e3)


@pytest.fixture(scope="session")
def null_ops(coarse_sphere):
    return assemble_operators(Scene([coarse_sphere], "water", ["water"]), 250e3)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def fat_ops_fine():
    """Water-fat sphere at 250 kHz, 642 nodes (six elements per wavelength in fat)."""
    return assemble_operators(Scene([generate_icosphere(RADIUS, 3)], "water", ["fat"]), 250e3)
