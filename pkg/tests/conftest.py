import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from fieldclt.domain import BoxDomain
from fieldclt.kernels import CovarianceOracle, KernelSpec

settings.register_profile("fieldclt", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("fieldclt")


@pytest.fixture(scope="session")
def bf1():
    return KernelSpec.bargmann_fock(1)


@pytest.fixture(scope="session")
def bf2():
    return KernelSpec.bargmann_fock(2)


@pytest.fixture(scope="session")
def oracle1(bf1):
    return CovarianceOracle(bf1)


@pytest.fixture(scope="session")
def oracle2(bf2):
    return CovarianceOracle(bf2)


@pytest.fixture(scope="session")
def short_kernel_1d():
    """Kernel whose range (0.6) keeps every grid value inside two neighbouring cubes."""
    return KernelSpec.gaussian(1, 0.4, truncation_radius=0.6)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def square(R, d=2):
    return BoxDomain.cube(R, d)
