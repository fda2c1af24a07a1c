import numpy as np
import pytest

from wavehom.bloch import BlochSolver
from wavehom.cell import CellGrid, constant_field, sine_field
from wavehom.effective import Impulse
from wavehom.hyperbolic_hierarchy import build_phi_a
from wavehom.spectral_hierarchy import build_spectral

# acceptance lines collected by tests/test_acceptance.py, printed at the end of the run
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[key])


@pytest.fixture(scope="session")
def field():
    return sine_field()


@pytest.fixture(scope="session")
def unit_field():
    return constant_field(1.0)


@pytest.fixture(scope="session")
def grid():
    return CellGrid(512)


@pytest.fixture(scope="session")
def spectral(field, grid):
    return build_spectral(field, 7, grid)


@pytest.fixture(scope="session")
def spectral_small(field):
    # coarse grid keeps double spectral differentiation noise low in residual identities
    return build_spectral(field, 7, CellGrid(128))


@pytest.fixture(scope="session")
def hyperbolic(field, grid):
    return build_phi_a(field, 7, grid)


@pytest.fixture(scope="session")
def hyperbolic_small(field):
    return build_phi_a(field, 7, CellGrid(128))


@pytest.fixture(scope="session")
def bloch(field, grid):
    return BlochSolver(field, 32, grid)


@pytest.fixture(scope="session")
def impulse():
    return Impulse.band_limited(L=8, R=4.0, seed=0)


@pytest.fixture(scope="session")
def small_impulse():
    # short torus for fine-solver tests
    return Impulse.band_limited(L=2, R=4.0, seed=3)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
