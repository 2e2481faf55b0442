import numpy as np
import pytest

from dualmink.sphere import build_geodesic_grid


@pytest.fixture(scope="session")
def grid3():
    return build_geodesic_grid(3)


@pytest.fixture(scope="session")
def grid4():
    return build_geodesic_grid(4)


@pytest.fixture()
def rng():
    return np.random.default_rng(20240811)


def random_polytope(rng, n=20, wobble=0.1):
    pts = rng.normal(size=(n, 3))
    pts /= np.linalg.norm(pts, axis=1, keepdims=True)
    pts *= 1.0 + wobble * rng.normal(size=(n, 1))
    from dualmink.bodies import Polytope
    return Polytope(pts)
