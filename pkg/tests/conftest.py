"""Shared bath spectra and a small exact bath."""

import pytest

from exact_bath import ExactBath
from spectrum import ZERO_TEMPERATURE, BathSpectrumSpec, InverseTemperature, discretize


@pytest.fixture(scope="session")
def resonant_spec():
    """Resonant Lorentzian, eta_max^2 = 0.07, t_c = 10."""
    return BathSpectrumSpec.from_memory_time(0.07, 1.0, 10.0)


@pytest.fixture(scope="session")
def purity_spec():
    return BathSpectrumSpec.from_memory_time(0.01, 2.0, 2.0)


@pytest.fixture(scope="session")
def weak_spec():
    """Broad, weak bath: short memory keeps rate tables small."""
    return BathSpectrumSpec.from_memory_time(0.05, 1.0, 2.0)


@pytest.fixture(scope="session")
def detuned_spec():
    """Peak above omega_a, the shape used for the cooling sweep."""
    return BathSpectrumSpec.from_memory_time(0.2, 1.0 / 0.7, 10.0)


@pytest.fixture(scope="session")
def zero_t():
    return ZERO_TEMPERATURE


@pytest.fixture(scope="session")
def unit_alpha():
    return InverseTemperature(1.0)


@pytest.fixture(scope="session")
def small_bath(resonant_spec):
    return ExactBath.from_spec(resonant_spec, n_modes=10)


@pytest.fixture(scope="session")
def full_small_bath(resonant_spec):
    """Both parity sectors, so |e, vac> exists."""
    return ExactBath.from_spec(resonant_spec, n_modes=6, parity_sector=False)


@pytest.fixture(scope="session")
def forty_mode_bath(resonant_spec):
    """The bundled exact-check bath: 40 modes over omega0 +- 5 Gamma, even sector (dim 861)."""
    return ExactBath.from_spec(resonant_spec, n_modes=40)


@pytest.fixture(scope="session")
def forty_mode_spec(resonant_spec):
    """Continuum spectrum carried by the 40-mode bath, for rate-equation runs."""
    return discretize(resonant_spec, 40).matching_spec()
