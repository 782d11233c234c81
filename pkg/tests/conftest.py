import numpy as np
import pytest

from multiharmonic.cascade import HarmonicProblem, SourceHarmonics
from multiharmonic.mesh import generate_disk
from multiharmonic.params import SimulationParams, derive_constants

ACCEPTANCE_LINES = []


def report(criterion, passed, detail):
    line = f"ACCEPTANCE {criterion:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def base_params():
    return SimulationParams()


@pytest.fixture(scope="session")
def dc(base_params):
    return derive_constants(base_params)


@pytest.fixture(scope="session")
def coarse_mesh():
    return generate_disk(0.2, 0.025)


@pytest.fixture(scope="session")
def tiny_mesh():
    return generate_disk(0.2, 0.05)


def make_problem(mesh, a=1e5, **params):
    p = SimulationParams(**params)
    return HarmonicProblem(mesh, p, SourceHarmonics.monopole(mesh, a))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
