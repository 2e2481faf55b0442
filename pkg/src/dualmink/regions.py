"""Borel-set stand-ins on the sphere: caps, hemispheres, unions, full sphere.

A region is a deterministic membership predicate over unit vectors; on a
grid it is realized node-wise as exactly the nodes satisfying the predicate.
``DirectionSet`` covers atomic regions such as a single facet normal.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError


class Region:
    def contains(self, points: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def node_mask(self, grid) -> np.ndarray:
        return self.contains(grid.nodes)


@dataclass(frozen=True)
class FullSphere(Region):
    def contains(self, points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(points)
        return np.ones(len(points), dtype=bool)


@dataclass(frozen=True)
class Cap(Region):
    """Closed spherical cap { v : <v, center> >= cos(angle) }."""

    center: tuple[float, float, float]
    angle: float

    def __post_init__(self):
        c = np.asarray(self.center, dtype=float)
        if abs(np.linalg.norm(c) - 1.0) > 1e-9:
            raise ConfigurationError("cap center must be a unit vector")
        if not 0.0 <= self.angle <= np.pi:
            raise ConfigurationError("cap angle must lie in [0, pi]")
        object.__setattr__(self, "center", tuple(float(x) for x in c))

    def contains(self, points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(points)
        return points @ np.asarray(self.center) >= np.cos(self.angle) - 1e-12


def hemisphere(center) -> Cap:
    return Cap(tuple(np.asarray(center, float)), np.pi / 2.0)


@dataclass(frozen=True)
class DirectionSet(Region):
    """Finite set of directions, each matched within an angular tolerance."""

    directions: tuple
    tol: float = 1e-9

    def __post_init__(self):
        d = np.atleast_2d(np.asarray(self.directions, dtype=float))
        norms = np.linalg.norm(d, axis=1)
        if np.abs(norms - 1.0).max() > 1e-9:
            raise ConfigurationError("directions must be unit vectors")
        object.__setattr__(self, "directions",
                           tuple(tuple(float(x) for x in row) for row in d))

    def contains(self, points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(points)
        d = np.asarray(self.directions)
        return (points @ d.T >= 1.0 - self.tol).any(axis=1)


@dataclass(frozen=True)
class Union(Region):
    parts: tuple

    def __post_init__(self):
        if not self.parts:
            raise ConfigurationError("region union needs at least one part")
        object.__setattr__(self, "parts", tuple(self.parts))

    def contains(self, points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(points)
        mask = np.zeros(len(points), dtype=bool)
        for part in self.parts:
            mask |= part.contains(points)
        return mask
