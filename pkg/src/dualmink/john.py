"""Maximal-volume inscribed (John) ellipsoid of a convex body.

The ellipsoid is parametrized as E = { C z + d : |z| <= 1 } with C symmetric
positive definite, and found by maximizing log det C subject to the
support-function containment constraints  |C a| + <a, d> <= b  collected from
the body: exact facet data for polytopes, the defining node constraints for
support grids, and a refined direction sample for ellipsoids.  The resulting
determinant-maximization problem is solved with a conic interior-point
solver through cvxpy.

In R^3 the John ellipsoid satisfies E subset K subset X + 3 (E - X); both
inclusions are checked a posteriori and reported.
"""

from __future__ import annotations

from dataclasses import dataclass

import cvxpy as cp
import numpy as np

from .bodies import ConvexBody, Ellipsoid, Polytope, SupportGrid, support_many
from .errors import NumericalError
from .sphere import build_geodesic_grid

#: Relative volume tolerance of the returned ellipsoid.
TOL_JOHN = 1e-3

_SOLVER_ORDER = ("CLARABEL", "SCS")


@dataclass(frozen=True)
class JohnEllipsoid:
    """Inscribed ellipsoid of maximal volume: center, sorted half-axes, axes."""

    center: np.ndarray         # (3,)
    half_axes: np.ndarray      # (3,) ascending
    axes: np.ndarray           # (3, 3) orthonormal columns, matching half_axes

    def __post_init__(self):
        for name in ("center", "half_axes", "axes"):
            arr = np.asarray(getattr(self, name), dtype=float).copy()
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    def support(self, dirs: np.ndarray) -> np.ndarray:
        dirs = np.atleast_2d(dirs)
        C = self.axes @ np.diag(self.half_axes) @ self.axes.T
        return dirs @ self.center + np.linalg.norm(dirs @ C, axis=1)

    @property
    def volume(self) -> float:
        return float(4.0 * np.pi / 3.0 * np.prod(self.half_axes))


def _constraint_data(body: ConvexBody, level: int) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(body, Polytope):
        return body.facet_normals, body.facet_offsets
    if isinstance(body, SupportGrid):
        return body.grid.nodes, body.values
    dirs = build_geodesic_grid(level).nodes
    return dirs, support_many(body, dirs)


def _solve_maxdet(A: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    import warnings

    C = cp.Variable((3, 3), PSD=True)
    d = cp.Variable(3)
    prob = cp.Problem(cp.Maximize(cp.log_det(C)),
                      [cp.norm(A @ C, axis=1) + A @ d <= b])
    last_exc = None
    for solver in _SOLVER_ORDER:
        if solver not in cp.installed_solvers():
            continue
        try:
            with warnings.catch_warnings():
                # status is checked explicitly below, and the result is
                # validated against the containment invariants by callers
                warnings.simplefilter("ignore")
                prob.solve(solver=solver)
        except cp.error.SolverError as exc:
            last_exc = exc
            continue
        if prob.status in ("optimal", "optimal_inaccurate") and C.value is not None:
            return np.asarray(C.value), np.asarray(d.value)
        last_exc = NumericalError(f"{solver} returned status {prob.status}")
    raise NumericalError(
        f"inscribed-ellipsoid optimization did not converge: {last_exc}")


def john_ellipsoid(body: ConvexBody, sample_level: int = 4) -> JohnEllipsoid:
    """Maximal inscribed ellipsoid, half-axes sorted ascending.

    For polytopes and support grids the constraint set is exact, so the
    answer is accurate to solver tolerance.  For ellipsoid bodies the
    constraints are tangent halfspaces at a dense direction sample; the
    tangencies pin the nine ellipsoid degrees of freedom, leaving a
    discretization bias far below TOL_JOHN (about 1e-9 at sample_level 4).
    """
    A, b = _constraint_data(body, sample_level)
    C, d = _solve_maxdet(A, b)
    C = 0.5 * (C + C.T)
    evals, evecs = np.linalg.eigh(C)
    if evals[0] <= 0:
        raise NumericalError(
            f"inscribed ellipsoid came back degenerate (eigenvalues {evals})")
    return JohnEllipsoid(center=d, half_axes=evals, axes=evecs)


def containment_gaps(body: ConvexBody, ell: JohnEllipsoid,
                     check_level: int = 4) -> tuple[float, float]:
    """Violations of E subset K and K subset X + 3 (E - X), in support terms.

    Returns (inner_gap, outer_gap): the max of h_E - h_K over directions
    (positive means E pokes out of K), and the max of h_K - h_{X+3(E-X)}.
    For polytopes both checks are exact (facet normals, vertex test).
    """
    X = ell.center
    if isinstance(body, Polytope):
        dirs = body.facet_normals
        inner = float((ell.support(dirs) - body.facet_offsets).max())
        # vertex test against the blown-up ellipsoid
        Cinv = ell.axes @ np.diag(1.0 / ell.half_axes) @ ell.axes.T
        z = (body.vertices - X) @ Cinv
        outer = float((np.linalg.norm(z, axis=1) - 3.0).max()
                      * ell.half_axes.min())
        return inner, outer
    dirs = build_geodesic_grid(check_level).nodes
    h_body = support_many(body, dirs)
    inner = float((ell.support(dirs) - h_body).max())
    h_outer = 3.0 * ell.support(dirs) - 2.0 * dirs @ X
    outer = float((h_body - h_outer).max())
    return inner, outer
