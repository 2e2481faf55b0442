"""Measures on the sphere generated by a convex body.

Covered here: the surface area measure (density det(grad^2 u + u I) for
smooth data, facet-normal atoms for polytopes), the cone volume measure
(1/3) h dS, dual curvature in both its radial-domain and boundary-integral
forms, the L_p weighted dual curvature, the pointwise density of the
associated Monge-Ampere equation, and the linear-equivariance pushforward
pair for cone volume.

Polytope integrals avoid the grid entirely: the reverse radial image of a
facet normal is the facet's radial cone, and integrating rho^q over the cone
against solid angle collapses to the flat facet integral
h_f * int_F |x|^(q-3) dH^2(x), evaluated by refined triangle quadrature.
That gives a quadrature-free arm to check the grid-based evaluations
against.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bodies import (ConvexBody, Ellipsoid, Polytope, SupportGrid,
                     curvature_data, radial_many, volume)
from .errors import (ConfigurationError, DegeneracyError, InvalidBodyError,
                     UnsupportedRegimeError)
from .regions import Region
from .sphere import ScalarField, SphericalGrid, build_geodesic_grid

DEFAULT_LEVEL = 4


# ---------------------------------------------------------------------------
# measure containers
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DensityMeasure:
    """Measure with a nonnegative density per grid node (mass = value*weight)."""

    grid: SphericalGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.grid.n_nodes,):
            raise ConfigurationError("density values do not match the grid")
        if v.min() < -1e-9 * max(1.0, np.abs(v).max()):
            raise InvalidBodyError(
                f"negative density {v.min():.3e} (convexity violation?)")
        v = np.maximum(v, 0.0)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def total_mass(self) -> float:
        return float(np.dot(self.grid.weights, self.values))

    def mass(self, region: Region) -> float:
        mask = region.node_mask(self.grid)
        return float(np.dot(self.grid.weights[mask], self.values[mask]))

    def rows(self):
        """(node index, density value, quadrature weight) triples."""
        for i, (val, w) in enumerate(zip(self.values, self.grid.weights)):
            yield i, float(val), float(w)


@dataclass(frozen=True)
class AtomicMeasure:
    """Finitely many atoms: support points on the sphere with masses."""

    points: np.ndarray
    masses: np.ndarray

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        m = np.asarray(self.masses, dtype=float)
        if len(pts) != len(m):
            raise ConfigurationError("points and masses differ in length")
        if m.min() < 0:
            raise InvalidBodyError("atom masses must be nonnegative")
        for arr, name in ((pts, "points"), (m, "masses")):
            arr = arr.copy()
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    def total_mass(self) -> float:
        return float(self.masses.sum())

    def mass(self, region: Region) -> float:
        return float(self.masses[region.contains(self.points)].sum())

    def rows(self):
        """(point, mass) pairs."""
        for p, m in zip(self.points, self.masses):
            yield tuple(map(float, p)), float(m)


SphericalMeasure = DensityMeasure | AtomicMeasure


def _resolve_grid(body: ConvexBody, grid: SphericalGrid | None) -> SphericalGrid:
    if grid is not None:
        return grid
    if isinstance(body, SupportGrid):
        return body.grid
    return build_geodesic_grid(DEFAULT_LEVEL)


# ---------------------------------------------------------------------------
# surface area and cone volume
# ---------------------------------------------------------------------------

def surface_area_measure(body: ConvexBody,
                         grid: SphericalGrid | None = None) -> SphericalMeasure:
    """S_K: facet-area atoms for polytopes, det(grad^2 u + u I) otherwise."""
    if isinstance(body, Polytope):
        return AtomicMeasure(body.facet_normals, body.facet_areas)
    grid = _resolve_grid(body, grid)
    _, _, det = curvature_data(body, grid)
    return DensityMeasure(grid, det)


def cone_volume_measure(body: ConvexBody,
                        grid: SphericalGrid | None = None) -> SphericalMeasure:
    """V_K = (1/3) h_K dS_K; total mass equals the volume of the body."""
    if isinstance(body, Polytope):
        return AtomicMeasure(body.facet_normals,
                             body.facet_offsets * body.facet_areas / 3.0)
    grid = _resolve_grid(body, grid)
    u, _, det = curvature_data(body, grid)
    return DensityMeasure(grid, u * det / 3.0)


# ---------------------------------------------------------------------------
# facet integrals for polytopes
# ---------------------------------------------------------------------------

# Degree-5 symmetric triangle rule (7 points, barycentric coordinates).
_TRI_B = np.array([
    [1 / 3, 1 / 3, 1 / 3],
    [0.059715871789770, 0.470142064105115, 0.470142064105115],
    [0.470142064105115, 0.059715871789770, 0.470142064105115],
    [0.470142064105115, 0.470142064105115, 0.059715871789770],
    [0.797426985353087, 0.101286507323456, 0.101286507323456],
    [0.101286507323456, 0.797426985353087, 0.101286507323456],
    [0.101286507323456, 0.101286507323456, 0.797426985353087],
])
_TRI_W = np.array([0.225,
                   0.132394152788506, 0.132394152788506, 0.132394152788506,
                   0.125939180544827, 0.125939180544827, 0.125939180544827])


def _refine(tris: np.ndarray) -> np.ndarray:
    a, b, c = tris[:, 0], tris[:, 1], tris[:, 2]
    ab, bc, ca = (a + b) / 2, (b + c) / 2, (c + a) / 2
    return np.concatenate([
        np.stack([a, ab, ca], axis=1),
        np.stack([b, bc, ab], axis=1),
        np.stack([c, ca, bc], axis=1),
        np.stack([ab, bc, ca], axis=1),
    ])


def triangle_quadrature(tris: np.ndarray, func, tol: float = 1e-10,
                        max_refine: int = 6) -> float:
    """Integral of func(x) over a union of flat triangles in R^3.

    Uniformly refines until two successive levels of the degree-5 rule agree
    to the requested relative tolerance.
    """
    tris = np.asarray(tris, dtype=float)
    prev = None
    for _ in range(max_refine + 1):
        pts = np.einsum("qb,nbk->nqk", _TRI_B, tris)
        areas = 0.5 * np.linalg.norm(
            np.cross(tris[:, 1] - tris[:, 0], tris[:, 2] - tris[:, 0]), axis=1)
        vals = func(pts.reshape(-1, 3)).reshape(len(tris), len(_TRI_W))
        total = float(np.einsum("nq,q,n->", vals, _TRI_W, areas))
        if prev is not None and abs(total - prev) <= tol * max(abs(total), 1e-300):
            return total
        prev = total
        tris = _refine(tris)
    return total


def _facet_radial_moments(poly: Polytope, q: float) -> np.ndarray:
    """Per facet, the flat integral of |x|^(q-3) over the facet."""
    out = np.empty(poly.n_facets)
    for k, tri_idx in enumerate(poly.facet_triangles):
        tris = poly.vertices[np.array(tri_idx)]
        out[k] = triangle_quadrature(
            tris, lambda x: np.linalg.norm(x, axis=1) ** (q - 3.0))
    return out


# ---------------------------------------------------------------------------
# dual curvature measures
# ---------------------------------------------------------------------------

def _radial_gauss_region_mask(body: ConvexBody, grid: SphericalGrid,
                              region: Region) -> np.ndarray:
    """Node mask of the reverse radial image: directions w whose boundary
    point rho(w) w carries an exterior normal inside the region."""
    w = grid.nodes
    if isinstance(body, Ellipsoid):
        x = radial_many(body, w)[:, None] * w
        n = (x - body.center) @ body.inv_quad_matrix
        n /= np.linalg.norm(n, axis=1, keepdims=True)
        return region.contains(n)
    if isinstance(body, SupportGrid):
        normals, offsets = body.grid.nodes, body.values
    else:
        normals, offsets = body.facet_normals, body.facet_offsets
    in_region = region.contains(normals)
    mask = np.zeros(len(w), dtype=bool)
    block = max(1, int(2 ** 22 // max(len(normals), 1)))
    for s in range(0, len(w), block):
        dots = w[s:s + block] @ normals.T
        with np.errstate(divide="ignore", invalid="ignore"):
            ratios = np.where(dots > 1e-12, offsets[None, :] / dots, np.inf)
        m = ratios.min(axis=1)
        active = ratios <= m[:, None] * (1.0 + 1e-12)
        mask[s:s + block] = (active & in_region[None, :]).any(axis=1)
    return mask


def dual_curvature_radial(body: ConvexBody, q: float, region: Region,
                          grid: SphericalGrid | None = None) -> float:
    """q-th dual curvature of the region, integrated in the radial domain.

    Smooth bodies: grid quadrature of rho^q over the reverse radial image of
    the region.  Polytopes: exact cone decomposition -- each facet whose
    normal lies in the region contributes the integral of rho^q over its
    radial cone, which collapses to h_f * int_F |x|^(q-3).
    """
    if q <= 0:
        raise ConfigurationError("dual curvature requires q > 0")
    if isinstance(body, Polytope):
        sel = region.contains(body.facet_normals)
        if not sel.any():
            return 0.0
        moments = _facet_radial_moments(body, q)
        return float((body.facet_offsets[sel] * moments[sel]).sum())
    grid = _resolve_grid(body, grid)
    mask = _radial_gauss_region_mask(body, grid, region)
    rho = radial_many(body, grid.nodes)
    return float(np.dot(grid.weights[mask], rho[mask] ** q))


def dual_curvature_boundary(body: ConvexBody, q: float, region: Region,
                            grid: SphericalGrid | None = None) -> float:
    """q-th dual curvature via the boundary integral of |x|^(q-3) <x, nu>."""
    return lp_dual_curvature(body, 0.0, q, region, grid)


def _check_p_regime(p: float, allow_unsupported: bool) -> None:
    if allow_unsupported:
        return
    if not 0.0 <= p < 1.0:
        raise UnsupportedRegimeError(
            f"p = {p} is outside the supported range [0, 1); pass "
            "allow_unsupported for exploratory use")


def lp_dual_curvature(body: ConvexBody, p: float, q: float, region: Region,
                      grid: SphericalGrid | None = None,
                      allow_unsupported: bool = False) -> float:
    """L_p q-th dual curvature of the region (boundary form).

    The integrand carries <x, nu>^(1-p) = h^(1-p); p = 0 degenerates to the
    plain dual curvature measure.  For smooth bodies this is the grid
    quadrature of |Dh|^(q-3) h^(1-p) det(grad^2 u + u I) over region nodes;
    for polytopes the exact facet sum of h_f^(1-p) int_F |x|^(q-3).
    Exponents p outside [0, 1) are exploratory and need the explicit flag.
    """
    if q <= 0:
        raise ConfigurationError("dual curvature requires q > 0")
    _check_p_regime(p, allow_unsupported)
    if isinstance(body, Polytope):
        sel = region.contains(body.facet_normals)
        if not sel.any():
            return 0.0
        moments = _facet_radial_moments(body, q)
        return float(((body.facet_offsets[sel] ** (1.0 - p)) * moments[sel]).sum())
    grid = _resolve_grid(body, grid)
    u, dh, det = curvature_data(body, grid)
    mask = region.node_mask(grid)
    integrand = dh[mask] ** (q - 3.0) * u[mask] ** (1.0 - p) * det[mask]
    return float(np.dot(grid.weights[mask], integrand))


def lp_dual_density(body: Ellipsoid | SupportGrid, p: float, q: float,
                    grid: SphericalGrid | None = None,
                    allow_unsupported: bool = False
                    ) -> tuple[ScalarField, float]:
    """Pointwise density f = (|grad u|^2 + u^2)^((q-3)/2) u^(1-p) det(...).

    Returns the field together with lambda = max(sup f, 1/inf f), the
    smallest constant bounding the density above and below around 1.
    Exponents p outside [0, 1) are exploratory and need the explicit flag.
    """
    if isinstance(body, Polytope):
        raise ConfigurationError(
            "the pointwise density needs a smooth-variant body")
    if q <= 0:
        raise ConfigurationError("dual curvature requires q > 0")
    _check_p_regime(p, allow_unsupported)
    grid = _resolve_grid(body, grid)
    u, dh, det = curvature_data(body, grid)
    f = dh ** (q - 3.0) * u ** (1.0 - p) * det
    if f.min() <= 0.0:
        node = int(np.argmin(f))
        raise DegeneracyError(
            f"density is nonpositive at node {node} (value {f.min():.3e})")
    lam = float(max(f.max(), 1.0 / f.min()))
    return ScalarField(grid, f), lam


# ---------------------------------------------------------------------------
# linear equivariance of the cone volume measure
# ---------------------------------------------------------------------------

def equivariance_pushforward(poly: Polytope, phi: np.ndarray,
                             region: Region) -> tuple[float, float]:
    """The pair (V_{phi K}(phi^-t_* region), |det phi| * V_K(region)).

    Both entries are computed exactly from facet data; the pushed-forward
    region membership test maps each facet normal of phi K back through
    phi^t and asks the original region.
    """
    if not isinstance(poly, Polytope):
        raise ConfigurationError("equivariance pushforward is defined for polytopes")
    phi = np.asarray(phi, dtype=float)
    if phi.shape != (3, 3):
        raise ConfigurationError("phi must be a 3x3 matrix")
    det = np.linalg.det(phi)
    svals = np.linalg.svd(phi, compute_uv=False)
    if svals[-1] <= 1e-12 * max(svals[0], 1e-300):
        raise ConfigurationError("phi is singular")

    sel = region.contains(poly.facet_normals)
    v_k = float((poly.facet_offsets[sel] * poly.facet_areas[sel]).sum() / 3.0)

    image = Polytope(poly.vertices @ phi.T, rho_min=1e-12)
    back = image.facet_normals @ phi
    back /= np.linalg.norm(back, axis=1, keepdims=True)
    sel_img = region.contains(back)
    v_phik = float((image.facet_offsets[sel_img]
                    * image.facet_areas[sel_img]).sum() / 3.0)
    return v_phik, abs(det) * v_k


__all__ = [
    "AtomicMeasure", "DensityMeasure", "SphericalMeasure",
    "surface_area_measure", "cone_volume_measure",
    "dual_curvature_radial", "dual_curvature_boundary",
    "lp_dual_curvature", "lp_dual_density", "equivariance_pushforward",
    "triangle_quadrature",
]
