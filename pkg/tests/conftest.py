import numpy as np
import pytest

from qcat.optimize import optimize


@pytest.fixture(scope="session")
def polar_52():
    """Optimal polar-bound pulse for I = 5/2, eta = 1."""
    return optimize(5, 1.0, "polar")


@pytest.fixture(scope="session")
def polar_32_showcase():
    return optimize(3, 0.3, "polar")


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


def random_state(rng, d):
    v = rng.normal(size=d) + 1j * rng.normal(size=d)
    return v / np.linalg.norm(v)


def random_density(rng, d, rank=3):
    a = rng.normal(size=(d, rank)) + 1j * rng.normal(size=(d, rank))
    rho = a @ a.conj().T
    return rho / np.trace(rho).real


def pytest_terminal_summary(terminalreporter):
    from tests import acceptance_registry

    if not acceptance_registry.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in acceptance_registry.lines():
        terminalreporter.write_line(line)
