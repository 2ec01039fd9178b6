import sys

import numpy as np
import pytest

from spdc.dispersion import CrystalConfig
from spdc.jsa import phase_matching_matrix
from spdc.pump import build_grid, gaussian_pump, sigma_omega_from_fwhm

FWHM = 3.54e-9
LAMBDA_P = 397.5e-9


def make_setup(length, n_points, halfwidth=12.0):
    sigma = sigma_omega_from_fwhm(FWHM, LAMBDA_P)
    grid = build_grid(2 * LAMBDA_P, halfwidth, sigma, n_points)
    base = gaussian_pump(grid, FWHM, LAMBDA_P)
    crystal = CrystalConfig.phase_matched(length, LAMBDA_P)
    return grid, base, crystal, phase_matching_matrix(grid, crystal)


@pytest.fixture(scope="session")
def small_setup():
    """0.5 mm crystal on a coarse 120-point grid."""
    return make_setup(0.5e-3, 120)


@pytest.fixture(scope="session")
def cluster_setup():
    """0.5 mm crystal on a 200-point grid, enough for frexel statistics."""
    return make_setup(0.5e-3, 200)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_symmetric(rng, n, scale=1.0):
    A = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return scale * (A + A.T) / 2


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("tests.test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
