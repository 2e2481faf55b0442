"""Monge-Ampere measure of piecewise-linear convex functions in the plane.

For v = max of finitely many affine pieces, the subgradient at a point is
the convex hull of the gradients of the pieces active there.  The measure
of a region is the area of the union of these subgradient images.  Distinct
envelope vertices have subgradient cells with disjoint interiors (they are
the cells of the dual weighted-Delaunay subdivision), so the union's area
is the plain sum of per-vertex hull areas: the computation is exact up to
the hull arithmetic, no polygon clipping in gradient space needed.

Cells of the upper envelope are cut out of the (convex) domain polygon by
halfplane clipping; vertices where at least three pieces meet carry the
mass.  This serves as the measure-sense (Alexandrov) oracle for the
spherical solver's local charts.
"""

from __future__ import annotations

import numpy as np
from scipy.spatial import ConvexHull, QhullError

from .errors import ConfigurationError

_CLUSTER_TOL = 1e-9


def _as_pieces(pieces) -> tuple[np.ndarray, np.ndarray]:
    if len(pieces) == 0:
        raise ConfigurationError("at least one affine piece is required")
    G = np.array([np.asarray(g, dtype=float) for g, _ in pieces])
    B = np.array([float(b) for _, b in pieces])
    if G.ndim != 2 or G.shape[1] != 2:
        raise ConfigurationError("piece gradients must be 2-vectors")
    # exact duplicates would fabricate spurious 'ties' along whole cells
    _, keep = np.unique(np.column_stack([G, B]), axis=0, return_index=True)
    keep.sort()
    return G[keep], B[keep]


def _cross2(a: np.ndarray, b: np.ndarray):
    return a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]


def _validate_polygon(poly, what: str) -> np.ndarray:
    poly = np.asarray(poly, dtype=float)
    if poly.ndim != 2 or poly.shape[1] != 2 or len(poly) < 3:
        raise ConfigurationError(f"{what} must be a polygon with >= 3 vertices")
    edges = np.roll(poly, -1, axis=0) - poly
    cross = _cross2(edges, np.roll(edges, -1, axis=0))
    if cross.min() < -1e-12 * max(1.0, np.abs(cross).max()):
        if cross.max() <= 1e-12 * max(1.0, np.abs(cross).max()):
            return poly[::-1]  # clockwise input; flip
        raise ConfigurationError(f"{what} must be convex")
    return poly


def _clip_halfplane(poly: np.ndarray, a: np.ndarray, c: float) -> np.ndarray:
    """Sutherland-Hodgman clip of a convex polygon by { x : <a, x> <= c }."""
    if len(poly) == 0:
        return poly
    vals = poly @ a - c
    out = []
    n = len(poly)
    for i in range(n):
        j = (i + 1) % n
        pi, pj = poly[i], poly[j]
        vi, vj = vals[i], vals[j]
        if vi <= 0:
            out.append(pi)
        if (vi < 0 < vj) or (vj < 0 < vi):
            t = vi / (vi - vj)
            out.append(pi + t * (pj - pi))
    return np.array(out) if out else np.empty((0, 2))


def _envelope_cells(G: np.ndarray, B: np.ndarray,
                    domain: np.ndarray) -> list[np.ndarray]:
    cells = []
    n = len(G)
    for i in range(n):
        poly = domain
        for j in range(n):
            if j == i:
                continue
            poly = _clip_halfplane(poly, G[j] - G[i], B[i] - B[j])
            if len(poly) == 0:
                break
        cells.append(poly)
    return cells


def _point_in_polygon(poly: np.ndarray, pt: np.ndarray, tol: float) -> bool:
    n = len(poly)
    for i in range(n):
        edge = poly[(i + 1) % n] - poly[i]
        if _cross2(edge, pt - poly[i]) < -tol:
            return False
    return True


def _hull_area(points: np.ndarray) -> float:
    if len(points) < 3:
        return 0.0
    try:
        return float(ConvexHull(points).volume)
    except QhullError:
        return 0.0  # collinear gradients span no area


def monge_ampere_measure_pl(pieces, domain, region) -> float:
    """Monge-Ampere measure over a region, for v = max of affine pieces.

    ``pieces`` is a sequence of (gradient, offset) pairs; ``domain`` and
    ``region`` are convex polygons given as vertex arrays.  The result is
    the area of the union of subgradient images over region points; cells
    escaping the domain are clipped away.
    """
    G, B = _as_pieces(pieces)
    domain = _validate_polygon(domain, "domain")
    region = _validate_polygon(region, "region")
    if len(G) == 1:
        return 0.0

    scale = max(1.0, np.abs(domain).max())
    cells = _envelope_cells(G, B, domain)

    # cluster coincident cell vertices across cells; each cluster is one
    # envelope vertex with the pieces whose cells touch it
    points, owners = [], []
    for i, poly in enumerate(cells):
        for pt in poly:
            points.append(pt)
            owners.append(i)
    if not points:
        return 0.0
    points = np.array(points)
    m = len(points)
    parent = list(range(m))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    tol = _CLUSTER_TOL * scale
    # point counts stay tiny (pieces x cell vertices), plain O(m^2) is fine
    for a in range(m):
        for b in range(a + 1, m):
            if np.abs(points[a] - points[b]).max() <= tol:
                ra, rb = find(a), find(b)
                if ra != rb:
                    parent[ra] = rb

    clusters: dict[int, list[int]] = {}
    for k in range(m):
        clusters.setdefault(find(k), []).append(k)

    total = 0.0
    for members in clusters.values():
        ids = sorted({owners[k] for k in members})
        if len(ids) < 3:
            continue
        pt = points[members[0]]
        if not _point_in_polygon(region, pt, tol):
            continue
        total += _hull_area(G[ids])
    return total


def active_gradient_hull_area(pieces, domain) -> float:
    """Area of conv{gradients of pieces achieving the max on the domain}."""
    G, B = _as_pieces(pieces)
    domain = _validate_polygon(domain, "domain")
    cells = _envelope_cells(G, B, domain)
    active = [i for i, c in enumerate(cells) if len(c) > 0]
    return _hull_area(G[active])
