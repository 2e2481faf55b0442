"""Geodesic discretization of the unit sphere S^2.

The grid is an icosahedral geodesic subdivision: level L has 10*4^L + 2
near-uniform nodes.  Quadrature weights assign one third of each spherical
triangle's area to each of its corners, so the weights sum to the total
solid angle 4*pi exactly (up to round-off) and the node rule integrates
piecewise-linear data exactly.

Differential operators act through a per-node least-squares polynomial fit
of the field in the tangent chart at that node (exponential-map pullback of
the 2-ring stencil).  The fit uses a cubic basis; the spherical gradient is
read from the linear coefficients and the chart Hessian from the quadratic
ones.  At the chart origin the chart Hessian coincides with the covariant
Hessian, which is what det(grad^2 u + u I) needs.  All fits are precomputed
at grid construction into sparse extraction matrices, so whole-field
gradient/Hessian evaluation is a handful of sparse mat-vecs.

Grids and fields are immutable after construction; every operation here is
pure, and reductions use a fixed summation order.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .errors import ConfigurationError, NumericalError

MAX_LEVEL = 7

# Quartic chart basis with one adaptation to the sphere: the linear slots
# hold y_i * sinc(|y|), the exact chart pullback of linear functions <v, a>,
# so restrictions of linear functions (and hence translations of support
# functions) are fitted without truncation error.  Cubic and quartic
# monomials soak up the higher-order part of general pullbacks; the 2-ring
# stencil (>= 16 points) keeps the fit overdetermined.  At the chart origin
# the sinc factor has unit value, zero gradient slope correction and zero
# Hessian, so the gradient/Hessian read-outs are the plain monomial ones.
_N_BASIS = 15


def _chart_basis(y: np.ndarray) -> np.ndarray:
    """Rows of the fit design matrix for chart points y (..., 2)."""
    y1, y2 = y[..., 0], y[..., 1]
    r = np.sqrt(y1 * y1 + y2 * y2)
    s = np.where(r > 1e-15, np.sin(r) / np.where(r > 1e-15, r, 1.0), 1.0)
    cols = [
        np.ones_like(y1), y1 * s, y2 * s,
        y1 * y1, y1 * y2, y2 * y2,
        y1 ** 3, y1 ** 2 * y2, y1 * y2 ** 2, y2 ** 3,
        y1 ** 4, y1 ** 3 * y2, y1 ** 2 * y2 ** 2, y1 * y2 ** 3, y2 ** 4,
    ]
    return np.stack(cols, axis=-1)


def _icosahedron() -> tuple[np.ndarray, np.ndarray]:
    """Vertices and outward-oriented faces of the regular icosahedron."""
    phi = (1.0 + np.sqrt(5.0)) / 2.0
    verts = []
    for s1 in (1.0, -1.0):
        for s2 in (phi, -phi):
            verts.append((s1, s2, 0.0))
            verts.append((0.0, s1, s2))
            verts.append((s2, 0.0, s1))
    nodes = np.array(verts) / np.sqrt(1.0 + phi * phi)
    from scipy.spatial import ConvexHull

    faces = ConvexHull(nodes).simplices
    return nodes, _orient_outward(nodes, faces)


def _orient_outward(nodes: np.ndarray, faces: np.ndarray) -> np.ndarray:
    a, b, c = (nodes[faces[:, k]] for k in range(3))
    flip = np.einsum("ij,ij->i", a, np.cross(b, c)) < 0.0
    faces = faces.copy()
    faces[flip] = faces[flip][:, [0, 2, 1]]
    return faces


def _subdivide(nodes: np.ndarray, faces: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """One 4-to-1 midpoint refinement, midpoints projected back to the sphere."""
    verts = [v for v in nodes]
    cache: dict[tuple[int, int], int] = {}

    def midpoint(i: int, j: int) -> int:
        key = (i, j) if i < j else (j, i)
        k = cache.get(key)
        if k is None:
            m = verts[i] + verts[j]
            m = m / np.linalg.norm(m)
            verts.append(m)
            k = len(verts) - 1
            cache[key] = k
        return k

    new_faces = []
    for a, b, c in faces:
        ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
        new_faces += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
    return np.array(verts), np.array(new_faces, dtype=np.int64)


def spherical_triangle_areas(nodes: np.ndarray, faces: np.ndarray) -> np.ndarray:
    """Solid angles of the spherical triangles spanned by face corners."""
    a, b, c = (nodes[faces[:, k]] for k in range(3))
    num = np.einsum("ij,ij->i", a, np.cross(b, c))
    den = 1.0 + np.einsum("ij,ij->i", a, b) + np.einsum("ij,ij->i", b, c) \
        + np.einsum("ij,ij->i", c, a)
    return 2.0 * np.arctan2(num, den)


def _tangent_frames(nodes: np.ndarray) -> np.ndarray:
    """Deterministic orthonormal tangent pair (e1, e2) at each node."""
    ref = np.zeros_like(nodes)
    polar = np.abs(nodes[:, 2]) > 0.9
    ref[~polar, 2] = 1.0
    ref[polar, 0] = 1.0
    e1 = np.cross(ref, nodes)
    e1 /= np.linalg.norm(e1, axis=1, keepdims=True)
    e2 = np.cross(nodes, e1)
    return np.stack([e1, e2], axis=1)


def log_map(v: np.ndarray, frame: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Chart coordinates of points w (m, 3) in the tangent chart at v."""
    cosg = np.clip(w @ v, -1.0, 1.0)
    theta = np.arccos(cosg)
    t = w - cosg[:, None] * v
    tn = np.linalg.norm(t, axis=1)
    safe = tn > 1e-15
    d = np.zeros_like(t)
    d[safe] = t[safe] / tn[safe, None]
    return theta[:, None] * (d @ frame.T)


class _FitOperators:
    """Sparse extraction matrices turning a field into per-node fit outputs."""

    def __init__(self, grad1, grad2, h11, h12, h22, deficient):
        self.grad1 = grad1
        self.grad2 = grad2
        self.h11 = h11
        self.h12 = h12
        self.h22 = h22
        self.deficient = deficient  # node indices with rank-deficient fits


@dataclass(frozen=True)
class SphericalGrid:
    """Immutable geodesic grid: nodes, quadrature weights, stencils, frames."""

    level: int
    nodes: np.ndarray              # (N, 3) unit vectors
    faces: np.ndarray              # (F, 3) node indices, outward oriented
    weights: np.ndarray            # (N,) quadrature weights in steradians
    stencils: tuple[np.ndarray, ...]  # per node, sorted 2-ring neighbor indices
    frames: np.ndarray             # (N, 2, 3) orthonormal tangent pairs
    ops: _FitOperators

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    def __repr__(self) -> str:  # ndarray fields make the default repr useless
        return f"SphericalGrid(level={self.level}, n_nodes={self.n_nodes})"

    def __eq__(self, other) -> bool:
        return isinstance(other, SphericalGrid) and other.level == self.level \
            and other.n_nodes == self.n_nodes

    def __hash__(self) -> int:
        return hash((self.level, self.n_nodes))

    # -- batched fit read-outs used throughout the package ------------------

    def fit_gradient(self, values: np.ndarray) -> np.ndarray:
        """Frame coefficients (N, 2) of the spherical gradient of the field."""
        return np.stack([self.ops.grad1 @ values, self.ops.grad2 @ values], axis=1)

    def fit_hessian(self, values: np.ndarray) -> np.ndarray:
        """Chart Hessian entries (N, 3) = (H11, H12, H22) of the field."""
        return np.stack(
            [self.ops.h11 @ values, self.ops.h12 @ values, self.ops.h22 @ values],
            axis=1,
        )

    def support_hessian_entries(self, values: np.ndarray) -> np.ndarray:
        """Entries (W11, W12, W22) of W = grad^2 u + u I per node."""
        h = self.fit_hessian(values)
        w = h.copy()
        w[:, 0] += values
        w[:, 2] += values
        return w

    def support_hessian_eigmin(self, values: np.ndarray) -> np.ndarray:
        """Smaller eigenvalue of W = grad^2 u + u I per node (convexity check)."""
        w = self.support_hessian_entries(values)
        mean = 0.5 * (w[:, 0] + w[:, 2])
        rad = np.sqrt((0.5 * (w[:, 0] - w[:, 2])) ** 2 + w[:, 1] ** 2)
        return mean - rad

    def chart_coords(self, node_index: int, indices: np.ndarray) -> np.ndarray:
        """Chart coordinates of the given nodes in the chart at node_index."""
        return log_map(self.nodes[node_index], self.frames[node_index],
                       self.nodes[indices])


def _build_stencils(n_nodes: int, faces: np.ndarray) -> tuple[np.ndarray, ...]:
    ring1: list[set[int]] = [set() for _ in range(n_nodes)]
    for a, b, c in faces:
        ring1[a].update((b, c))
        ring1[b].update((a, c))
        ring1[c].update((a, b))
    stencils = []
    for i in range(n_nodes):
        ring2 = set(ring1[i])
        for j in ring1[i]:
            ring2.update(ring1[j])
        ring2.discard(i)
        stencils.append(np.array(sorted(ring2), dtype=np.int64))
    return tuple(stencils)


# Gaussian moving-least-squares weight scale, as a fraction of the stencil
# radius.  Downweighting the outer ring shrinks the effective chart radius,
# which is what controls the aliasing of unresolved quintic terms.
_MLS_SIGMA = 0.7


def _build_fit_operators(nodes, frames, stencils) -> _FitOperators:
    n = len(nodes)
    sizes = np.array([len(s) + 1 for s in stencils])
    kmax = int(sizes.max())
    design = np.zeros((n, kmax, _N_BASIS))
    wdesign = np.zeros((n, kmax, _N_BASIS))
    sqw = np.zeros((n, kmax))
    cols = np.zeros((n, kmax), dtype=np.int64)
    valid = np.zeros((n, kmax), dtype=bool)
    for i, st in enumerate(stencils):
        idx = np.concatenate(([i], st))
        y = log_map(nodes[i], frames[i], nodes[idx])
        r2 = (y ** 2).sum(axis=1)
        w = np.sqrt(np.exp(-r2 / (_MLS_SIGMA ** 2 * r2.max())))
        design[i, : len(idx)] = _chart_basis(y)
        wdesign[i, : len(idx)] = w[:, None] * design[i, : len(idx)]
        sqw[i, : len(idx)] = w
        cols[i, : len(idx)] = idx
        valid[i, : len(idx)] = True

    # Padded rows are zero, so the corresponding pinv columns vanish and the
    # padded column indices never contribute.
    svals = np.linalg.svd(wdesign, compute_uv=False)
    rank_ok = svals[:, -1] > 1e-10 * svals[:, 0]
    deficient = np.flatnonzero(~rank_ok)
    pinv = np.linalg.pinv(wdesign) * sqw[:, None, :]  # (N, _N_BASIS, kmax)

    rows = np.repeat(np.arange(n), kmax).reshape(n, kmax)[valid]
    flat_cols = cols[valid]

    def extractor(coeff_row: np.ndarray) -> sp.csr_matrix:
        data = coeff_row[valid]
        return sp.csr_matrix((data, (rows, flat_cols)), shape=(n, n))

    return _FitOperators(
        grad1=extractor(pinv[:, 1, :]),
        grad2=extractor(pinv[:, 2, :]),
        h11=extractor(2.0 * pinv[:, 3, :]),
        h12=extractor(pinv[:, 4, :]),
        h22=extractor(2.0 * pinv[:, 5, :]),
        deficient=deficient,
    )


def _build(level: int) -> SphericalGrid:
    nodes, faces = _icosahedron()
    for _ in range(level):
        nodes, faces = _subdivide(nodes, faces)
    faces = _orient_outward(nodes, faces)

    areas = spherical_triangle_areas(nodes, faces)
    weights = np.zeros(len(nodes))
    for k in range(3):
        np.add.at(weights, faces[:, k], areas / 3.0)

    stencils = _build_stencils(len(nodes), faces)
    frames = _tangent_frames(nodes)
    ops = _build_fit_operators(nodes, frames, stencils)

    for arr in (nodes, faces, weights, frames):
        arr.setflags(write=False)
    return SphericalGrid(level=level, nodes=nodes, faces=faces, weights=weights,
                         stencils=stencils, frames=frames, ops=ops)


@lru_cache(maxsize=None)
def build_geodesic_grid(level: int) -> SphericalGrid:
    """Icosahedral geodesic grid with 10*4^level + 2 nodes.

    Grids are cached per level within the process; see save_grid/load_grid
    for the on-disk cache.
    """
    if not isinstance(level, (int, np.integer)) or not 0 <= level <= MAX_LEVEL:
        raise ConfigurationError(
            f"grid level must be an integer in [0, {MAX_LEVEL}], got {level!r}")
    return _build(int(level))


def save_grid(grid: SphericalGrid, path: str | Path) -> None:
    """Cache a grid to a .npz file (nodes and faces; the rest is rebuilt)."""
    np.savez_compressed(path, level=grid.level, nodes=grid.nodes, faces=grid.faces)


def load_grid(path: str | Path) -> SphericalGrid:
    """Load a grid cached by save_grid, rebuilding weights/stencils/fits."""
    with np.load(path) as data:
        level = int(data["level"])
        nodes = np.array(data["nodes"])
        faces = np.array(data["faces"])
    areas = spherical_triangle_areas(nodes, faces)
    weights = np.zeros(len(nodes))
    for k in range(3):
        np.add.at(weights, faces[:, k], areas / 3.0)
    stencils = _build_stencils(len(nodes), faces)
    frames = _tangent_frames(nodes)
    ops = _build_fit_operators(nodes, frames, stencils)
    for arr in (nodes, faces, weights, frames):
        arr.setflags(write=False)
    return SphericalGrid(level=level, nodes=nodes, faces=faces, weights=weights,
                         stencils=stencils, frames=frames, ops=ops)


@dataclass(frozen=True)
class ScalarField:
    """One real value per grid node."""

    grid: SphericalGrid
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != (self.grid.n_nodes,):
            raise ConfigurationError(
                f"field has {values.shape} values for a grid of "
                f"{self.grid.n_nodes} nodes")
        if not np.all(np.isfinite(values)):
            bad = int(np.flatnonzero(~np.isfinite(values))[0])
            raise ConfigurationError(f"non-finite field value at node {bad}")
        values = values.copy()
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return len(self.values)


def constant_field(grid: SphericalGrid, value: float) -> ScalarField:
    return ScalarField(grid, np.full(grid.n_nodes, float(value)))


def quadrature(grid: SphericalGrid, field: ScalarField) -> float:
    """Node-rule integral sum_i w_i f_i over the sphere."""
    if field.grid is not grid and field.grid != grid:
        raise ConfigurationError("field does not live on the given grid")
    return float(np.dot(grid.weights, field.values))


def _check_fit_ok(grid: SphericalGrid, node_index: int) -> None:
    if node_index in grid.ops.deficient:
        raise NumericalError(f"rank-deficient tangent-chart fit at node {node_index}")


def spherical_gradient(grid: SphericalGrid, field: ScalarField,
                       node_index: int) -> np.ndarray:
    """Frame coefficients (a1, a2) of the spherical gradient at one node."""
    _check_fit_ok(grid, node_index)
    v = field.values
    return np.array([grid.ops.grad1[node_index] @ v,
                     grid.ops.grad2[node_index] @ v]).ravel()


def gradient_vectors(grid: SphericalGrid, values: np.ndarray) -> np.ndarray:
    """Spherical gradient as 3-vectors (N, 3), for frame-free comparisons."""
    g = grid.fit_gradient(values)
    return g[:, 0:1] * grid.frames[:, 0] + g[:, 1:2] * grid.frames[:, 1]


def ma_operator(grid: SphericalGrid, field: ScalarField) -> ScalarField:
    """det(grad^2 u + u I) per node, the support-function Monge-Ampere operator."""
    if len(grid.ops.deficient):
        raise NumericalError(
            f"rank-deficient tangent-chart fit at node {int(grid.ops.deficient[0])}")
    w = grid.support_hessian_entries(field.values)
    det = w[:, 0] * w[:, 2] - w[:, 1] ** 2
    return ScalarField(grid, det)
