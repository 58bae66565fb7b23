import numpy as np
import pytest

from movingbeam import (
    BeamParameters,
    HermiteSpace,
    ManufacturedCase,
    Mesh,
    MovingBoundary,
    assemble_constant,
)


@pytest.fixture(scope="session")
def params():
    return BeamParameters(zeta0=128.0, zeta1=2.0, nu=1.0)


@pytest.fixture(scope="session")
def b1_1d():
    return MovingBoundary.b1(1)


@pytest.fixture(scope="session")
def b2_1d():
    return MovingBoundary.b2(1)


@pytest.fixture(scope="session")
def s1_1d():
    return ManufacturedCase.standard("S1", 1)


@pytest.fixture(scope="session")
def s1_2d():
    return ManufacturedCase.standard("S1", 2)


@pytest.fixture(scope="session")
def space_1d_coarse():
    return HermiteSpace(Mesh.uniform(1, 8))


@pytest.fixture(scope="session")
def space_2d_coarse():
    return HermiteSpace(Mesh.uniform(2, 4))


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240817)
