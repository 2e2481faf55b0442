import numpy as np

from dualmink.bodies import Ellipsoid, cube, sample_support_grid
from dualmink.john import containment_gaps, john_ellipsoid

from conftest import random_polytope
from oracles import slsqp_inscribed_volume


class TestKnownBodies:
    def test_cube_gives_unit_ball(self):
        ell = john_ellipsoid(cube())
        assert np.abs(ell.half_axes - 1.0).max() < 1e-3
        assert np.abs(ell.center).max() < 1e-3

    def test_ellipsoid_is_its_own(self):
        body = Ellipsoid(np.array([1.0, 1.2, 1.5]))
        ell = john_ellipsoid(body)
        assert np.abs(ell.half_axes - [1.0, 1.2, 1.5]).max() < 1e-3
        assert np.abs(ell.center).max() < 1e-3

    def test_rotated_shifted_ellipsoid(self, rng):
        q, r = np.linalg.qr(rng.normal(size=(3, 3)))
        q *= np.sign(np.diag(r))
        if np.linalg.det(q) < 0:
            q[:, 0] = -q[:, 0]
        body = Ellipsoid(np.array([0.8, 1.0, 1.3]),
                         center=np.array([0.1, -0.05, 0.2]), axes=q)
        ell = john_ellipsoid(body)
        assert np.abs(ell.half_axes - [0.8, 1.0, 1.3]).max() < 1e-3
        assert np.linalg.norm(ell.center - body.center) < 1e-3

    def test_support_grid_of_ellipsoid(self, grid4):
        body = sample_support_grid(Ellipsoid(np.array([1.0, 1.2, 1.5])), grid4)
        ell = john_ellipsoid(body)
        assert np.abs(ell.half_axes - [1.0, 1.2, 1.5]).max() < 2e-3


class TestInvariants:
    def test_half_axes_sorted(self, rng):
        for _ in range(3):
            ell = john_ellipsoid(random_polytope(rng))
            assert ell.half_axes[0] <= ell.half_axes[1] <= ell.half_axes[2]

    def test_axes_orthonormal(self, rng):
        ell = john_ellipsoid(random_polytope(rng))
        assert np.abs(ell.axes.T @ ell.axes - np.eye(3)).max() < 1e-9

    def test_containment_on_random_polytopes(self, rng):
        for _ in range(5):
            poly = random_polytope(rng)
            ell = john_ellipsoid(poly)
            inner, outer = containment_gaps(poly, ell)
            assert inner < 1e-6   # E inside K
            assert outer < 1e-6   # K inside center + 3 (E - center)


class TestAgainstMultistartOracle:
    def test_random_polytope_volume(self, rng):
        for seed in range(2):
            poly = random_polytope(rng)
            ell = john_ellipsoid(poly)
            oracle = slsqp_inscribed_volume(poly.facet_normals,
                                            poly.facet_offsets, seed=seed)
            # SLSQP is the weaker optimizer; it must not beat the conic
            # solution by more than the tolerance, and should get close
            assert oracle <= ell.volume * (1 + 1e-3)
            assert oracle >= ell.volume * (1 - 1e-3)
