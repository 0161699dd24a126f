import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from fourwave.bath import BathSpec
from fourwave.exciton import SiteSystem, diagonalize, project_dipoles
from fourwave.units import wavenumber_to_angular

settings.register_profile("fourwave", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("fourwave")


@pytest.fixture
def dimer():
    return SiteSystem([12000.0, 12150.0], [[0.0, 80.0], [80.0, 0.0]], [[1.0, 0.0, 0.0], [0.3, 1.0, 0.0]])


@pytest.fixture
def dimer_basis(dimer):
    return diagonalize(dimer)


@pytest.fixture
def dimer_dipoles(dimer_basis):
    # distinct polarizations so every channel sees different dipole products
    return project_dipoles(dimer_basis, [1, 0, 0], [0, 1, 0], [0.6, 0.8, 0], [1, 0, 0])


@pytest.fixture
def room_beta():
    # 300 K: k_B T = 208.5 cm^-1
    return 1.0 / wavenumber_to_angular(208.5103)


@pytest.fixture
def dimer_bath(room_beta):
    w = wavenumber_to_angular(np.array([100.0, 300.0]))
    return BathSpec(w, room_beta, [[0.25, 0.15], [0.2, 0.3]])


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance")
    if mod is not None and mod.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(mod.RESULTS):
            terminalreporter.write_line(line)
