import numpy as np
import pytest

from phononpump import _kernels
from phononpump.models import DissipationParams, SystemParams
from phononpump.vacuum import pressure_spectrum

# criterion number -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE: dict = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        passed, detail = ACCEPTANCE[number]
        terminalreporter.write_line(
            f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}")


@pytest.fixture
def rabi():
    """Small Rabi model with a raised-cosine drive."""
    return SystemParams(omega_a=1.0, omega_sigma=1.0, lambda0=0.5, delta_omega=1.0,
                        omega_b=1e-3, omega_d=1e-3, cavity_cutoff=12)


@pytest.fixture(scope="session")
def desk():
    """Ratio-preserving desk-scale parameters in units of omega_b."""
    return SystemParams(omega_a=400.0, omega_sigma=400.0, lambda0=200.0, delta_omega=400.0,
                        omega_b=1.0, omega_d=1.0, g=0.0025, cavity_cutoff=15,
                        phonon_cutoff=30)


@pytest.fixture(scope="session")
def desk_damping():
    gamma = 1e-4
    return DissipationParams(gamma_b=2 * gamma / 3, gamma_D=gamma / 3)


@pytest.fixture(scope="session")
def desk_spectrum(desk):
    return pressure_spectrum(desk)


@pytest.fixture(params=_kernels.available_backends())
def backend(request):
    previous = _kernels.active_backend()
    _kernels.use_backend(request.param)
    yield request.param
    _kernels.use_backend(previous)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
