import numpy as np
import pytest

from stefan2p.geometry import build_reference_geometry
from stefan2p.grid import PhaseGrid
from stefan2p.spectral import compute_eigenstructure


@pytest.fixture(scope="session")
def geom():
    return build_reference_geometry(1.0, 2.0, 256)


@pytest.fixture(scope="session")
def grids(geom):
    return {"minus": PhaseGrid("minus", geom, 64),
            "plus": PhaseGrid("plus", geom, 64)}


@pytest.fixture(scope="session")
def constants(grids):
    return compute_eigenstructure(grids, eta=0.2)


@pytest.fixture(scope="session")
def small_geom():
    return build_reference_geometry(1.0, 2.0, 64)


@pytest.fixture(scope="session")
def small_grids(small_geom):
    return {"minus": PhaseGrid("minus", small_geom, 24),
            "plus": PhaseGrid("plus", small_geom, 24)}


def l_inf(a):
    return float(np.max(np.abs(a)))
