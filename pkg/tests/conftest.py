import numpy as np
import pytest

from bulksurf.assembly import build_system
from bulksurf.eigen import solve_smallest
from bulksurf.mesh import AnnulusParams, generate_annulus
from bulksurf.oracle import lowest_modes


@pytest.fixture(scope="session")
def tiny_mesh():
    return generate_annulus(AnnulusParams(1.0, 2.0, 2, 8))


@pytest.fixture(scope="session")
def fine_params():
    return AnnulusParams(1.0, 2.0, 16, 64)


@pytest.fixture(scope="session")
def fine_mesh(fine_params):
    return generate_annulus(fine_params)


@pytest.fixture(scope="session")
def fine_system(fine_mesh):
    return build_system(fine_mesh)


@pytest.fixture(scope="session")
def fine_spectrum(fine_system):
    return solve_smallest(fine_system, 10)


@pytest.fixture(scope="session")
def small_mesh():
    # 5 x 40 free dofs = 200, inside the dense-path comfort zone
    return generate_annulus(AnnulusParams(1.0, 2.0, 5, 40))


@pytest.fixture(scope="session")
def small_system(small_mesh):
    return build_system(small_mesh)


@pytest.fixture(scope="session")
def small_spectrum(small_system):
    return solve_smallest(small_system, 10)


@pytest.fixture(scope="session")
def oracle():
    return lowest_modes(1.0, 2.0, 10)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
