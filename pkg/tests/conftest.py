import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from harmonicflow import (
    UnitSphere,
    build_circle,
    build_flat_torus,
    build_icosphere,
)


@pytest.fixture(scope="session")
def s2():
    return UnitSphere(3)


@pytest.fixture(scope="session")
def s1():
    return UnitSphere(2)


@pytest.fixture(scope="session")
def circle256():
    return build_circle(256)


@pytest.fixture(scope="session")
def torus16():
    return build_flat_torus(16, 16)


@pytest.fixture(scope="session")
def ico2():
    return build_icosphere(2)


@pytest.fixture(scope="session")
def ico3():
    return build_icosphere(3)


@pytest.fixture(scope="session")
def ico4():
    return build_icosphere(4)
