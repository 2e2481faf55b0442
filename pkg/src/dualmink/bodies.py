"""Convex bodies with the origin interior, and their geometric primitives.

Three representations are supported:

* ``Ellipsoid`` -- center, half-axes and principal directions; support,
  radial function and curvature data all have closed forms.
* ``Polytope`` -- the convex hull of a vertex list; facet data comes from
  the hull, with coplanar hull simplices merged into facets.
* ``SupportGrid`` -- support-function samples u > 0 on a geodesic grid;
  the body is the Wulff shape (aspect body) of the samples, i.e. the
  intersection of the halfspaces <x, v_i> <= u_i over all grid nodes.

Every body keeps the origin interior with a configurable margin; operations
assume h > 0 throughout.  Bodies are immutable and all operations are pure.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import ConvexHull, QhullError, cKDTree

from .errors import AmbiguityError, InvalidBodyError
from .sphere import ScalarField, SphericalGrid

#: Default interior margin: radial function must stay above this everywhere.
RHO_MIN = 1e-3

#: Default tolerance on the smaller eigenvalue of grad^2 u + u I.
TOL_CONVEX = 1e-6


def _unit_rows(arr: np.ndarray, what: str) -> None:
    if np.abs(np.linalg.norm(arr, axis=-1) - 1.0).max() > 1e-9:
        raise InvalidBodyError(f"{what} must be unit vectors")


# ---------------------------------------------------------------------------
# representations
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Ellipsoid:
    """{ center + axes @ diag(half_axes) z : |z| <= 1 } with O interior."""

    half_axes: np.ndarray                  # (3,) positive
    center: np.ndarray = None              # (3,), defaults to the origin
    axes: np.ndarray = None                # (3, 3) orthonormal columns
    rho_min: float = RHO_MIN

    def __post_init__(self):
        r = np.asarray(self.half_axes, dtype=float)
        c = np.zeros(3) if self.center is None else np.asarray(self.center, float)
        a = np.eye(3) if self.axes is None else np.asarray(self.axes, float)
        if r.shape != (3,) or np.any(r <= 0):
            raise InvalidBodyError("half_axes must be three positive reals")
        if c.shape != (3,):
            raise InvalidBodyError("center must be a 3-vector")
        if a.shape != (3, 3) or np.abs(a.T @ a - np.eye(3)).max() > 1e-9:
            raise InvalidBodyError("axes must be a 3x3 orthonormal matrix")
        for arr, name in ((r, "half_axes"), (c, "center"), (a, "axes")):
            arr = arr.copy()
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        # O interior with margin: the radial function is minimized somewhere
        # on the sphere; a dense direction sample bounds it well enough for a
        # margin check.
        qc = np.linalg.norm((c @ a) / r)
        if qc >= 1.0:
            raise InvalidBodyError("origin is not interior to the ellipsoid")
        dirs = _margin_directions()
        if radial_many(self, dirs).min() < self.rho_min:
            raise InvalidBodyError(
                f"radial function drops below the interior margin {self.rho_min}")

    @property
    def quad_matrix(self) -> np.ndarray:
        """M = axes diag(half_axes^2) axes^T, so h(v) = <X,v> + sqrt(v M v)."""
        return self.axes @ np.diag(self.half_axes ** 2) @ self.axes.T

    @property
    def inv_quad_matrix(self) -> np.ndarray:
        return self.axes @ np.diag(self.half_axes ** -2.0) @ self.axes.T


@dataclass(frozen=True)
class Polytope:
    """Convex hull of a vertex list with O interior; facet data precomputed."""

    vertices: np.ndarray                   # (m, 3)
    rho_min: float = RHO_MIN
    # facet data, filled in __post_init__
    facet_normals: np.ndarray = field(default=None, repr=False)
    facet_offsets: np.ndarray = field(default=None, repr=False)
    facet_areas: np.ndarray = field(default=None, repr=False)
    facet_triangles: tuple = field(default=None, repr=False)

    def __post_init__(self):
        verts = np.asarray(self.vertices, dtype=float)
        if verts.ndim != 2 or verts.shape[1] != 3 or len(verts) < 4:
            raise InvalidBodyError("polytope needs at least 4 points in R^3")
        try:
            hull = ConvexHull(verts)
        except QhullError as exc:
            raise InvalidBodyError(f"vertex hull is not full-dimensional: {exc}")
        normals, offsets, areas, tri_groups = _merge_facets(verts, hull)
        if offsets.min() < self.rho_min:
            raise InvalidBodyError(
                "origin is not interior with the required margin "
                f"(min facet offset {offsets.min():.3e} < {self.rho_min})")
        verts = verts.copy()
        verts.setflags(write=False)
        object.__setattr__(self, "vertices", verts)
        object.__setattr__(self, "facet_normals", normals)
        object.__setattr__(self, "facet_offsets", offsets)
        object.__setattr__(self, "facet_areas", areas)
        object.__setattr__(self, "facet_triangles", tri_groups)

    @property
    def n_facets(self) -> int:
        return len(self.facet_offsets)


@dataclass(frozen=True)
class SupportGrid:
    """Wulff shape of positive support samples on a geodesic grid."""

    grid: SphericalGrid
    values: np.ndarray                     # (N,) positive support samples
    rho_min: float = RHO_MIN
    tol_convex: float = TOL_CONVEX

    def __post_init__(self):
        u = np.asarray(self.values, dtype=float)
        if u.shape != (self.grid.n_nodes,):
            raise InvalidBodyError("support samples do not match the grid")
        if u.min() <= 0:
            raise InvalidBodyError("support samples must be positive")
        if u.min() < self.rho_min:
            raise InvalidBodyError(
                f"support minimum {u.min():.3e} is below the interior margin")
        eigmin = self.grid.support_hessian_eigmin(u)
        if eigmin.min() < -self.tol_convex:
            node = int(np.argmin(eigmin))
            raise InvalidBodyError(
                f"convexity check failed at node {node}: smallest eigenvalue "
                f"of grad^2 u + u I is {eigmin[node]:.3e}")
        u = u.copy()
        u.setflags(write=False)
        object.__setattr__(self, "values", u)

    def field(self) -> ScalarField:
        return ScalarField(self.grid, self.values)


ConvexBody = Ellipsoid | Polytope | SupportGrid


def _margin_directions() -> np.ndarray:
    from .sphere import build_geodesic_grid

    return build_geodesic_grid(2).nodes


def _merge_facets(verts: np.ndarray, hull: ConvexHull):
    """Group coplanar hull simplices into facets (normal, offset, area, tris)."""
    eqs = hull.equations  # rows (n, -h) with n x <= h
    simplices = hull.simplices
    n_s = len(simplices)
    scale = np.abs(verts).max()
    parent = list(range(n_s))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    order = np.lexsort(eqs.T)
    eqs_sorted = eqs[order]
    # coplanar simplices have near-identical equations; a sorted sweep with a
    # window catches them without O(n^2) comparisons
    window = 64
    for a in range(n_s):
        for b in range(a + 1, min(a + window, n_s)):
            if np.abs(eqs_sorted[a, :3] - eqs_sorted[b, :3]).max() < 1e-9 and \
               abs(eqs_sorted[a, 3] - eqs_sorted[b, 3]) < 1e-9 * max(scale, 1.0):
                ra, rb = find(order[a]), find(order[b])
                if ra != rb:
                    parent[ra] = rb

    groups: dict[int, list[int]] = {}
    for i in range(n_s):
        groups.setdefault(find(i), []).append(i)

    normals, offsets, areas, tri_groups = [], [], [], []
    for members in groups.values():
        tris = simplices[members]
        cross = np.zeros(3)
        for t in tris:
            a, b, c = verts[t]
            cr = np.cross(b - a, c - a)
            # orient along the hull's outward normal
            if cr @ eqs[members[0], :3] < 0:
                cr = -cr
            cross += cr
        area = 0.0
        for t in tris:
            a, b, c = verts[t]
            area += 0.5 * np.linalg.norm(np.cross(b - a, c - a))
        n = cross / np.linalg.norm(cross)
        normals.append(n)
        offsets.append(float(verts[tris[0][0]] @ n))
        areas.append(area)
        tri_groups.append(tris)

    idx = np.lexsort(np.array(normals).T)
    normals = np.array(normals)[idx]
    offsets = np.array(offsets)[idx]
    areas = np.array(areas)[idx]
    tri_groups = tuple(tuple(map(tuple, tri_groups[i])) for i in idx)
    for arr in (normals, offsets, areas):
        arr.setflags(write=False)
    return normals, offsets, areas, tri_groups


# ---------------------------------------------------------------------------
# support function
# ---------------------------------------------------------------------------

def support_many(body: ConvexBody, dirs: np.ndarray) -> np.ndarray:
    """Support values h_K for a batch of unit directions (m, 3)."""
    dirs = np.atleast_2d(np.asarray(dirs, float))
    if isinstance(body, Ellipsoid):
        m = np.sqrt(np.einsum("ij,jk,ik->i", dirs, body.quad_matrix, dirs))
        return dirs @ body.center + m
    if isinstance(body, Polytope):
        return (dirs @ body.vertices.T).max(axis=1)
    return _support_grid_interpolate(body, dirs)


def support(body: ConvexBody, v: np.ndarray) -> float:
    """h_K(v) = max over K of <v, x>."""
    v = np.asarray(v, float)
    _unit_rows(v, "support directions")
    return float(support_many(body, v)[0])


def _support_grid_interpolate(body: SupportGrid, dirs: np.ndarray) -> np.ndarray:
    """Barycentric interpolation of u over the containing spherical triangle.

    The interpolant is linear on each cone over a grid face, which is the
    1-homogeneous extension of the nodewise data.
    """
    grid, u = body.grid, body.values
    tree = _face_lookup(grid)
    out = np.empty(len(dirs))
    for k, v in enumerate(dirs):
        face = _containing_face(grid, tree, v)
        tri = grid.faces[face]
        lam = np.linalg.solve(grid.nodes[tri].T, v)
        out[k] = lam @ u[tri]
    return out


_FACE_CACHE: dict[int, tuple] = {}


def _face_lookup(grid: SphericalGrid):
    key = id(grid)
    if key not in _FACE_CACHE:
        incident: list[list[int]] = [[] for _ in range(grid.n_nodes)]
        for f, tri in enumerate(grid.faces):
            for t in tri:
                incident[t].append(f)
        _FACE_CACHE[key] = (cKDTree(grid.nodes), tuple(map(tuple, incident)))
    return _FACE_CACHE[key]


def _containing_face(grid: SphericalGrid, lookup, v: np.ndarray) -> int:
    tree, incident = lookup
    _, nearest = tree.query(v, k=4)
    candidates = []
    for n in np.atleast_1d(nearest):
        candidates.extend(incident[int(n)])
    best, best_min = None, -np.inf
    for f in dict.fromkeys(candidates):
        tri = grid.faces[f]
        try:
            lam = np.linalg.solve(grid.nodes[tri].T, v)
        except np.linalg.LinAlgError:
            continue
        m = lam.min()
        if m > best_min:
            best, best_min = f, m
        if m >= -1e-12:
            return f
    if best is not None and best_min > -1e-9:
        return best
    # extremely rare: fall back to a full scan
    for f, tri in enumerate(grid.faces):
        lam = np.linalg.solve(grid.nodes[tri].T, v)
        if lam.min() >= -1e-12:
            return f
    raise InvalidBodyError("direction is not covered by the grid triangulation")


# ---------------------------------------------------------------------------
# radial function
# ---------------------------------------------------------------------------

def radial_many(body: ConvexBody, dirs: np.ndarray) -> np.ndarray:
    """Radial values rho_K for a batch of unit directions (m, 3)."""
    dirs = np.atleast_2d(np.asarray(dirs, float))
    if isinstance(body, Ellipsoid):
        q = body.inv_quad_matrix
        a = np.einsum("ij,jk,ik->i", dirs, q, dirs)
        b = -2.0 * dirs @ (q @ body.center)
        c = body.center @ q @ body.center - 1.0
        return (-b + np.sqrt(b * b - 4.0 * a * c)) / (2.0 * a)
    if isinstance(body, Polytope):
        return _halfspace_radial(body.facet_normals, body.facet_offsets, dirs)
    return _halfspace_radial(body.grid.nodes, body.values, dirs)


def _halfspace_radial(normals, offsets, dirs) -> np.ndarray:
    dots = dirs @ normals.T
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = np.where(dots > 1e-12, offsets[None, :] / dots, np.inf)
    return ratios.min(axis=1)


def radial(body: ConvexBody, w: np.ndarray) -> float:
    """rho_K(w) = max { t >= 0 : t w in K }."""
    w = np.asarray(w, float)
    _unit_rows(w, "radial directions")
    return float(radial_many(body, w)[0])


# ---------------------------------------------------------------------------
# boundary maps
# ---------------------------------------------------------------------------

def support_gradient(body: ConvexBody, v: np.ndarray) -> np.ndarray:
    """Boundary point x = Dh_K(v) with exterior normal v.

    Raises AmbiguityError where h_K is not differentiable (polytope normal
    on a normal-cone boundary, support-grid direction on a grid node).
    """
    v = np.asarray(v, float)
    _unit_rows(v, "gradient directions")
    if isinstance(body, Ellipsoid):
        m = np.sqrt(v @ body.quad_matrix @ v)
        return body.center + body.quad_matrix @ v / m
    if isinstance(body, Polytope):
        dots = body.vertices @ v
        order = np.argsort(dots)
        top, second = dots[order[-1]], dots[order[-2]]
        scale = max(abs(top), 1.0)
        if top - second <= 1e-9 * scale:
            raise AmbiguityError(
                "direction lies on a normal-cone boundary of the polytope; "
                "perturb the query direction")
        return body.vertices[order[-1]].astype(float)
    # SupportGrid: h is linear on each cone over a grid face, so the gradient
    # is the face's Wulff vertex; at the nodes themselves several faces meet.
    grid = body.grid
    if np.max(grid.nodes @ v) > 1.0 - 1e-12:
        raise AmbiguityError(
            "direction coincides with a grid node where the piecewise-linear "
            "support function is not differentiable; perturb the query")
    face = _containing_face(grid, _face_lookup(grid), v)
    tri = grid.faces[face]
    return np.linalg.solve(grid.nodes[tri], body.values[tri])


def radial_gauss(body: ConvexBody, w: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Boundary point rho_K(w) w and the exterior unit normal(s) there."""
    w = np.asarray(w, float)
    _unit_rows(w, "radial directions")
    rho = radial(body, w)
    x = rho * w
    if isinstance(body, Ellipsoid):
        n = body.inv_quad_matrix @ (x - body.center)
        return x, (n / np.linalg.norm(n))[None, :]
    if isinstance(body, Polytope):
        normals, offsets = body.facet_normals, body.facet_offsets
    else:
        normals, offsets = body.grid.nodes, body.values
    slack = offsets - normals @ x
    scale = max(float(np.abs(offsets).max()), 1.0)
    active = slack <= 1e-9 * scale
    return x, normals[active]


# ---------------------------------------------------------------------------
# volume and curvature data
# ---------------------------------------------------------------------------

def volume(body: ConvexBody) -> float:
    """Lebesgue volume of the body."""
    if isinstance(body, Ellipsoid):
        return float(4.0 * np.pi / 3.0 * np.prod(body.half_axes))
    if isinstance(body, Polytope):
        # cone decomposition over facets from the interior origin
        return float((body.facet_offsets * body.facet_areas).sum() / 3.0)
    grid, u = body.grid, body.values
    det = _support_grid_det(body)
    return float(np.dot(grid.weights, u * det) / 3.0)


def _support_grid_det(body: SupportGrid) -> np.ndarray:
    w = body.grid.support_hessian_entries(body.values)
    return w[:, 0] * w[:, 2] - w[:, 1] ** 2


def curvature_data(body: Ellipsoid | SupportGrid, grid: SphericalGrid):
    """Per-node support data (u, |Dh|, det(grad^2 u + u I)) of a smooth body.

    Ellipsoids are evaluated in closed form; support grids through the
    tangent-chart fits of their own grid (which must be the one passed in).
    """
    if isinstance(body, SupportGrid):
        if grid is not body.grid and grid != body.grid:
            raise InvalidBodyError("support-grid body lives on a different grid")
        u = body.values
        g = grid.fit_gradient(u)
        dh = np.sqrt(g[:, 0] ** 2 + g[:, 1] ** 2 + u ** 2)
        return u, dh, _support_grid_det(body)

    v = grid.nodes
    M = body.quad_matrix
    mv = v @ M
    m = np.sqrt(np.einsum("ij,ij->i", mv, v))
    u = v @ body.center + m
    dh = np.linalg.norm(body.center[None, :] + mv / m[:, None], axis=1)
    # det of the tangential restriction of D^2 sqrt(x M x), which equals
    # det(grad^2 u + u I) for the 1-homogeneous support function
    e1, e2 = grid.frames[:, 0], grid.frames[:, 1]
    me1, me2 = e1 @ M, e2 @ M
    b11 = (np.einsum("ij,ij->i", me1, e1) - (mv * e1).sum(1) ** 2 / m ** 2) / m
    b22 = (np.einsum("ij,ij->i", me2, e2) - (mv * e2).sum(1) ** 2 / m ** 2) / m
    b12 = (np.einsum("ij,ij->i", me1, e2)
           - (mv * e1).sum(1) * (mv * e2).sum(1) / m ** 2) / m
    det = b11 * b22 - b12 ** 2
    return u, dh, det


def sample_support_grid(body: ConvexBody, grid: SphericalGrid,
                        rho_min: float = RHO_MIN,
                        tol_convex: float = TOL_CONVEX) -> SupportGrid:
    """Sample any body's support function onto a grid as a SupportGrid body."""
    return SupportGrid(grid, support_many(body, grid.nodes),
                       rho_min=rho_min, tol_convex=tol_convex)


def cube(half_width: float = 1.0) -> Polytope:
    """Axis-aligned cube [-a, a]^3, a standard test body."""
    corners = np.array([[sx, sy, sz] for sx in (-1, 1) for sy in (-1, 1)
                        for sz in (-1, 1)], dtype=float)
    return Polytope(half_width * corners)
