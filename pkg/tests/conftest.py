import numpy as np
import pytest

from marginal_lp import MarginalSpec, build_mesh, sample_marginal

ACCEPTANCE_LINES = []


def gaussian(mesh, mu=0.5, sigma2=0.1):
    return sample_marginal(MarginalSpec("gaussian", mu=mu, sigma2=sigma2), mesh)


def uniform(mesh):
    return sample_marginal(MarginalSpec("uniform"), mesh)


@pytest.fixture(scope="session")
def mesh30():
    return build_mesh(2, 30)


@pytest.fixture(scope="session")
def row1(mesh30):
    """Both marginals Gaussian with mean 1/2 and variance 0.1."""
    g = gaussian(mesh30)
    return [g, g]


@pytest.fixture(scope="session")
def row2(mesh30):
    return [gaussian(mesh30, 1 / 3), gaussian(mesh30, 2 / 3)]


@pytest.fixture(scope="session")
def row3(mesh30):
    return [uniform(mesh30), gaussian(mesh30)]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
